import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterable, Mapping, Optional

import toml

from utils.errors import ConfigError

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "../config/config.toml")
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "../config/default_config.toml")
SEED_ENV_VAR = "CAPTIONFLOW_SEED"
AMBIENT_SECTIONS = ("debug", "logging")


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Loads a TOML (or .json) configuration file; a missing default file yields {}."""
    explicit = path is not None
    path = path or CONFIG_PATH
    if not os.path.exists(path):
        if explicit:
            raise ConfigError(f"Config file not found: {path}", field="config")
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.endswith(".json"):
                config = json.load(f)
            else:
                config = toml.load(f)
    except (toml.TomlDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not parse config file {path}: {e}", field="config") from e
    logging.debug(f"🛠️ Loaded config from {path}: {config}")
    return config


def _opt(default, section: str, help: str, choices: Iterable[str] = None):
    metadata = {"section": section, "help": help}
    if choices:
        metadata["choices"] = tuple(choices)
    return field(default=default, metadata=metadata)


@dataclass
class RunConfig:
    """Every tunable of a CaptionFlow run. Defaults reproduce the published experimental settings."""

    # [model]
    T: int = _opt(40, "model", "sampled frames per video")
    N: int = _opt(5, "model", "object regions per frame")
    K: int = _opt(64, "model", "VLAD cluster centers")
    hidden: int = _opt(512, "model", "decoder GRU hidden size")
    embed: int = _opt(512, "model", "word embedding size")
    attention: int = _opt(100, "model", "attention projection size")
    kernel_size: int = _opt(3, "model", "C-GRU convolution kernel size (odd)")
    dropout: float = _opt(0.5, "model", "dropout on the decoder GRU output")

    # [train]
    learning_rate: float = _opt(1e-4, "train", "Adam learning rate")
    batch_size: int = _opt(16, "train", "training batch size")
    grad_clip: float = _opt(10.0, "train", "elementwise gradient clip bound")
    max_sentence_len: int = _opt(16, "train", "longest training sentence in words")
    max_steps: int = _opt(10000, "train", "optimizer steps to run")
    eval_every: int = _opt(500, "train", "steps between validation evaluations")
    patience: int = _opt(5, "train", "validation evaluations without improvement before stopping")
    checkpoint_every: int = _opt(1000, "train", "steps between periodic checkpoints")
    log_every: int = _opt(10, "train", "steps between console progress lines")
    min_count: int = _opt(1, "train", "minimum token count for the vocabulary")
    seed: int = _opt(1234, "train", "random seed")
    joint_directions: bool = _opt(True, "train", "sum direction losses into one update")

    # [inference]
    beam: int = _opt(5, "inference", "beam width")
    fusion: str = _opt("mean", "inference", "forward/backward score fusion", ("mean", "geometric"))

    # [modes]
    direction: str = _opt("both", "modes", "temporal graph directions", ("forward", "backward", "both"))
    use_objects: bool = _opt(True, "modes", "object-aware stream; false keeps the frame-only baseline")
    assignment_softmax: bool = _opt(False, "modes", "softmax the C-GRU assignments over clusters")
    share_direction_params: bool = _opt(False, "modes", "share encoders between directions")

    # [gradcheck]
    gradcheck_eps: float = _opt(1e-6, "gradcheck", "central difference step")
    gradcheck_tolerance: float = _opt(1e-4, "gradcheck", "max relative error per parameter group")

    # [synth]
    synth_videos: int = _opt(5, "synth", "videos in a synthetic corpus")
    synth_height: int = _opt(2, "synth", "feature map height")
    synth_width: int = _opt(2, "synth", "feature map width")
    synth_channels: int = _opt(8, "synth", "feature map channels")
    synth_appearance_dim: int = _opt(16, "synth", "appearance vector size")

    # [paths]
    data_root: str = _opt("data", "paths", "dataset directory (manifest, captions, splits)")
    manifest: str = _opt("", "paths", "manifest.json path; defaults to <data_root>/manifest.json")
    captions: str = _opt("", "paths", "captions JSON-lines path; defaults to <data_root>/captions.jsonl")
    train_split: str = _opt("", "paths", "train split file")
    val_split: str = _opt("", "paths", "validation split file")
    test_split: str = _opt("", "paths", "split captioned / traced / evaluated")
    checkpoint: str = _opt("checkpoints/model.ckpt", "paths", "checkpoint file")
    output: str = _opt("", "paths", "output file; stdout when empty")
    predictions: str = _opt("", "paths", "caption JSON lines scored by eval; eval captions the test split when empty")
    ground_truth: str = _opt("", "paths", "planted trajectories scored by trace-graph; defaults to <data_root>/ground_truth.json")
    log_file: str = _opt("", "paths", "training JSON-lines log")
    resume: bool = _opt(False, "paths", "continue from the checkpoint file")

    def __post_init__(self):
        self.validate()

    @property
    def directions(self):
        return ("forward", "backward") if self.direction == "both" else (self.direction,)

    def resolve(self, name: str) -> str:
        """Returns a path field, falling back to its file under data_root."""
        value = getattr(self, name)
        if value:
            return value
        fallback = {"manifest": "manifest.json", "captions": "captions.jsonl",
                    "train_split": "train.txt", "val_split": "val.txt", "test_split": "test.txt", "ground_truth": "ground_truth.json"}
        if name in fallback:
            return os.path.join(self.data_root, fallback[name])
        return value

    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            choices = f.metadata.get("choices")
            if choices and value not in choices:
                raise ConfigError(f"{f.name} must be one of {choices}, got {value!r}", field=f.name)
            if f.type in (int, float, "int", "float") and not isinstance(value, bool):
                if not isinstance(value, (int, float)):
                    raise ConfigError(f"{f.name} must be numeric, got {value!r}", field=f.name)
                if f.name == "dropout":
                    if not 0.0 <= value < 1.0:
                        raise ConfigError("dropout must lie in [0, 1)", field=f.name)
                elif f.name in ("learning_rate", "seed"):
                    if value < 0:
                        raise ConfigError(f"{f.name} must be non-negative", field=f.name)
                elif value <= 0:
                    raise ConfigError(f"{f.name} must be positive, got {value!r}", field=f.name)
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd for same-padding", field="kernel_size")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def field_specs():
    """(name, type, default, section, help, choices) for every RunConfig field."""
    for f in fields(RunConfig):
        yield f.name, f.type, f.default, f.metadata["section"], f.metadata["help"], f.metadata.get("choices")


def flatten(config: Mapping[str, Any]) -> Dict[str, Any]:
    """Merges TOML sections into the flat RunConfig key space; logging sections are skipped."""
    flat = {}
    for key, value in config.items():
        if key in AMBIENT_SECTIONS:
            continue
        items = value.items() if isinstance(value, Mapping) else [(key, value)]
        for sub_key, sub_value in items:
            if sub_key in flat:
                raise ConfigError(f"Duplicate config key: {sub_key}", field=sub_key)
            flat[sub_key] = sub_value
    return flat


def _coerce(name: str, kind, raw: Any) -> Any:
    if not isinstance(raw, str):
        if kind in (float, "float") and isinstance(raw, int) and not isinstance(raw, bool):
            return float(raw)
        return raw
    try:
        if kind in (bool, "bool"):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid value for {name}: {raw!r}", field=name) from e
    return raw


def build_run_config(
    file_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None
) -> RunConfig:
    """
    Builds a RunConfig with precedence flags > file > defaults.

    Args:
        file_path: TOML or JSON config file (sections or flat keys)
        overrides: flag values; None entries are ignored
        environ: environment mapping consulted for the seed override

    Returns:
        RunConfig: validated configuration
    """
    known = {name: kind for name, kind, *_ in field_specs()}
    values = {}
    layers = [flatten(load_config(file_path)) if file_path else {}, dict(overrides or {})]
    for layer in layers:
        for name, raw in layer.items():
            if raw is None:
                continue
            if name not in known:
                raise ConfigError(f"Unknown config field: {name}", field=name)
            values[name] = _coerce(name, known[name], raw)

    environ = os.environ if environ is None else environ
    if environ.get(SEED_ENV_VAR):
        values["seed"] = _coerce("seed", int, environ[SEED_ENV_VAR])

    return RunConfig(**values)


def run_config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Rebuilds a RunConfig stored in a checkpoint header, ignoring retired keys."""
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in data.items() if k in known})

