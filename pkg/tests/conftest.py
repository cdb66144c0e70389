import numpy as np
import pytest

from dwpverify.cli import default_config_path, load_config


@pytest.fixture(scope="session")
def catalog():
    return load_config(default_config_path())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.LINES):
            terminalreporter.write_line(test_acceptance.LINES[number])
