# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import enum
import logging as _logging

from baddiff import utils as baddiff_utils

_TRACE = 5
_logging.addLevelName(_TRACE, "TRACE")

_ROOT_LOGGER_NAME = "baddiff"


class LoggingLevel(enum.Enum):
    TRACE = _TRACE
    DEBUG = _logging.DEBUG
    INFO = _logging.INFO
    WARNING = _logging.WARNING
    ERROR = _logging.ERROR
    FATAL = _logging.CRITICAL
    NONE = _logging.CRITICAL + 10


# One-letter abbreviations accepted by the command-line interface.
_ABBREVIATIONS = {
    "T": LoggingLevel.TRACE,
    "D": LoggingLevel.DEBUG,
    "I": LoggingLevel.INFO,
    "W": LoggingLevel.WARNING,
    "WARN": LoggingLevel.WARNING,
    "E": LoggingLevel.ERROR,
    "F": LoggingLevel.FATAL,
    "N": LoggingLevel.NONE,
}


def _root_logger() -> _logging.Logger:
    logger = _logging.getLogger(_ROOT_LOGGER_NAME)

    if not logger.handlers:
        handler = _logging.StreamHandler()
        handler.setFormatter(_logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.setLevel(LoggingLevel.WARNING.value)
        logger.propagate = False

    return logger


def _get_logger(module_name: str) -> _logging.Logger:
    _root_logger()
    short = module_name.rpartition(".")[2]
    return _logging.getLogger("{}.{}".format(_ROOT_LOGGER_NAME, short))


def get_minimal_logging_level() -> LoggingLevel:
    return LoggingLevel.TRACE


def get_global_logging_level() -> LoggingLevel:
    return LoggingLevel(_root_logger().level)


def set_global_logging_level(level: LoggingLevel):
    baddiff_utils._check_type(level, LoggingLevel)
    _root_logger().setLevel(level.value)


def parse_logging_level(text: str) -> LoggingLevel:
    baddiff_utils._check_str(text)
    key = text.strip().upper()

    if key in _ABBREVIATIONS:
        return _ABBREVIATIONS[key]

    try:
        return LoggingLevel[key]
    except KeyError:
        raise ValueError("unknown logging level `{}`".format(text)) from None


def _progress_enabled() -> bool:
    return get_global_logging_level().value <= LoggingLevel.INFO.value
