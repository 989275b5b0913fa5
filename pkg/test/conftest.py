# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="run end-to-end experiments"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end experiment (needs --run-slow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return

    skip = pytest.mark.skip(reason="needs --run-slow")

    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
