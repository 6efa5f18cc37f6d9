import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from imlfista.checks import small_operator

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def op8():
    """Operator on 8x8 images with its coverage (norm estimated)."""
    return small_operator(8, 6, 20, seed=3)


@pytest.fixture(scope="session")
def op32():
    return small_operator(32, 8, 40, seed=4)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
