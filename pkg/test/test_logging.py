# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import pytest

import baddiff
from baddiff import logging as baddiff_logging


@pytest.fixture
def restore_level():
    level = baddiff.get_global_logging_level()
    yield
    baddiff.set_global_logging_level(level)


def test_default_level():
    assert baddiff.get_minimal_logging_level() is baddiff.LoggingLevel.TRACE
    assert baddiff.LoggingLevel.NONE.value > baddiff.LoggingLevel.FATAL.value


def test_set_global_level(restore_level):
    baddiff.set_global_logging_level(baddiff.LoggingLevel.DEBUG)

    assert baddiff.get_global_logging_level() is baddiff.LoggingLevel.DEBUG
    assert baddiff_logging._progress_enabled()

    baddiff.set_global_logging_level(baddiff.LoggingLevel.ERROR)

    assert not baddiff_logging._progress_enabled()


def test_set_global_level_type():
    with pytest.raises(TypeError):
        baddiff.set_global_logging_level("DEBUG")


@pytest.mark.parametrize(
    "text,level",
    [
        ("T", baddiff.LoggingLevel.TRACE),
        ("debug", baddiff.LoggingLevel.DEBUG),
        ("I", baddiff.LoggingLevel.INFO),
        ("warn", baddiff.LoggingLevel.WARNING),
        ("WARNING", baddiff.LoggingLevel.WARNING),
        ("e", baddiff.LoggingLevel.ERROR),
        ("FATAL", baddiff.LoggingLevel.FATAL),
        (" N ", baddiff.LoggingLevel.NONE),
    ],
)
def test_parse_level(text, level):
    assert baddiff_logging.parse_logging_level(text) is level


def test_parse_unknown_level():
    with pytest.raises(ValueError):
        baddiff_logging.parse_logging_level("loud")


def test_module_loggers_share_root():
    logger = baddiff_logging._get_logger("baddiff.training")

    assert logger.name == "baddiff.training"
    assert logger.parent.name == "baddiff"
