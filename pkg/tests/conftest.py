"""Shared fixtures and the --runslow gate for long optimizer runs."""

from pathlib import Path

import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run tests marked slow (full-size optimizer runs, several minutes)",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test, enable with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def scenario_dir():
    return Path(__file__).resolve().parent.parent / "scenario"
