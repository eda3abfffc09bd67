import json
import logging
import os
import sys
import colorama
from typing import Any, Dict, Optional
from tools.config_loader import load_config

# Initialize colorama for cross-platform color support
colorama.init()

# ANSI color codes optimized for dark terminal backgrounds
COLORS = {
    'RESET': '\033[0m',
    'INFO': '\033[38;5;39m',     # Light blue
    'DEBUG': '\033[38;5;245m',   # Medium gray
    'WARNING': '\033[38;5;214m', # Amber
    'ERROR': '\033[38;5;196m',   # Red
    'CRITICAL': '\033[48;5;196m\033[38;5;231m', # White on red background
    'TIME': '\033[38;5;245m',
    'NAME': '\033[38;5;149m'     # Soft green for logger names
}

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'
DATE_FORMAT = '%H:%M:%S'

LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR
}


class ColoredFormatter(logging.Formatter):
    """Formatter adding color to the level, timestamp and logger name."""

    def format(self, record):
        levelname = record.levelname
        if levelname in COLORS:
            record.levelname = f"{COLORS[levelname]}{levelname}{COLORS['RESET']}"
        try:
            message = super().format(record)
        finally:
            record.levelname = levelname

        if '%(asctime)s' in self._fmt:
            message = message.replace(
                record.asctime,
                f"{COLORS['TIME']}{record.asctime}{COLORS['RESET']}",
                1
            )
        if '%(name)s' in self._fmt:
            message = message.replace(
                record.name,
                f"{COLORS['NAME']}{record.name}{COLORS['RESET']}",
                1
            )
        return message


class LoggingConfig:
    """Centralized logging configuration manager."""

    _configured = False

    @classmethod
    def setup_logging(
        cls,
        level: Optional[str] = None,
        to_file: Optional[bool] = None,
        log_dir: Optional[str] = None,
        config_path: Optional[str] = None,
        force: bool = False
    ) -> logging.Logger:
        """
        Configure the root logger from the [logging]/[debug] config sections.

        Explicit arguments win over the config file. Repeated calls are no-ops
        unless ``force`` is set.

        Args:
            level (str, optional): DEBUG, INFO, WARNING or ERROR
            to_file (bool, optional): Also write plain-text logs to ``log_dir``
            log_dir (str, optional): Directory for ``captionflow.log``
            config_path (str, optional): Run config file; defaults to config/config.toml
            force (bool): Reconfigure even if already configured

        Returns:
            logging.Logger: The root logger
        """
        root_logger = logging.getLogger()
        if cls._configured and not force:
            return root_logger

        config = load_config(config_path)
        debug_mode = config.get('debug', {}).get('debug_mode', False)
        logging_config = config.get('logging', {})

        fallback = logging.DEBUG if debug_mode else logging.INFO
        chosen = level or logging_config.get('level')
        log_level = LEVELS.get(chosen.upper(), fallback) if chosen else fallback

        root_logger.setLevel(log_level)
        root_logger.handlers = []

        console_handler = logging.StreamHandler(stream=sys.stderr)
        console_handler.setFormatter(ColoredFormatter(LOG_FORMAT, DATE_FORMAT))
        console_handler.setLevel(log_level)
        root_logger.addHandler(console_handler)

        if to_file is None:
            to_file = logging_config.get('to_file', False)
        if to_file:
            log_dir = log_dir or logging_config.get('log_dir', 'logs')
            os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(os.path.join(log_dir, 'captionflow.log'), encoding='utf-8')
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
            file_handler.setLevel(log_level)
            root_logger.addHandler(file_handler)

        cls._configured = True
        return root_logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger, configuring the root logger on first use.

    Args:
        name (str, optional): Name of the logger

    Returns:
        logging.Logger: Configured logger
    """
    LoggingConfig.setup_logging()
    return logging.getLogger(name) if name else logging.getLogger()


class JsonLinesWriter:
    """Appends one JSON object per line; used for the training step log."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._handle = None
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            self._handle = open(path, 'a', encoding='utf-8')

    def write(self, record: Dict[str, Any]):
        if self._handle is None:
            return
        self._handle.write(json.dumps(record, sort_keys=True) + '\n')
        self._handle.flush()

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
