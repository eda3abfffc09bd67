import argparse
import sys

from tools.config_loader import build_run_config, field_specs
from tools.tool_factory import COMMANDS, ToolFactory
from utils.errors import CaptionFlowError, ConfigError
from utils.logging_utils import LoggingConfig, get_logger

COMMAND_HELP = {
    "train": "train the captioner and write a checkpoint",
    "caption": "caption the test split with beam search (JSON lines)",
    "trace-graph": "dump forward/backward trajectories of the test split (JSON)",
    "gradcheck": "verify analytic gradients against finite differences",
    "eval": "BLEU@4 of captions against the references",
    "synth": "write a synthetic corpus with planted ground truth",
}

# Force UTF-8 encoding for logging on Windows
if sys.platform == 'win32':
    sys.stdout.reconfigure(encoding='utf-8')
    sys.stderr.reconfigure(encoding='utf-8')


def _add_config_flags(parser: argparse.ArgumentParser):
    sections = {}
    for name, kind, default, section, help_text, choices in field_specs():
        group = sections.get(section)
        if group is None:
            group = sections[section] = parser.add_argument_group(f"[{section}]")
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        shown = default if default != "" else '""'
        if kind in (bool, "bool"):
            group.add_argument(*flags, dest=name, action=argparse.BooleanOptionalAction, default=None,
                               help=f"{help_text} (default: {str(default).lower()})")
        else:
            group.add_argument(*flags, dest=name, default=None, choices=choices, metavar=None if choices else name.upper(),
                               help=f"{help_text} (default: {shown})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="captionflow",
        description="Object-aware video captioning over bidirectional temporal graphs.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=COMMAND_HELP[command], description=COMMAND_HELP[command])
        sub.add_argument("--config", help="TOML or JSON config file (flags override it)")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override any config field; repeatable")
        sub.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="console log level")
        _add_config_flags(sub)
    return parser


def parse_overrides(args: argparse.Namespace) -> dict:
    """--set pairs first, then dedicated flags, so a flag wins over --set for the same field."""
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", field="set")
        overrides[key.strip()] = value
    for name, *_ in field_specs():
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    LoggingConfig.setup_logging(level=args.log_level, force=True)
    logger = get_logger("Main")
    try:
        if args.config:
            LoggingConfig.setup_logging(level=args.log_level, config_path=args.config, force=True)
        config = build_run_config(args.config, parse_overrides(args))
        tool = ToolFactory(config).get_tool(args.command)
        tool.run()
    except CaptionFlowError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
