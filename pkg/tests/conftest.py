import numpy as np
import pytest

from midas.synthdata import SynthConfig, gen_dataset

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Log a pass/fail line for an acceptance criterion; printed in the terminal summary."""

    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(height=8, width=8, n_train=42, n_test=21, seed=7)


@pytest.fixture(scope="session")
def small_dataset(small_config):
    return gen_dataset(small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
