import numpy as np
import pytest
from hypothesis import settings

from stable_girsanov.model import ProcessSpec, ReferenceDensity, f_theta, zero_functional

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spec():
    return ProcessSpec()


@pytest.fixture(scope="session")
def ref():
    return ReferenceDensity()


@pytest.fixture(scope="session")
def ftheta(spec):
    return f_theta(0.3, spec)


@pytest.fixture(scope="session")
def fzero(spec):
    return zero_functional(spec)


def cauchy(t, r):
    return t / (np.pi * (np.asarray(r) ** 2 + t * t))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
