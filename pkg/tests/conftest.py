import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "relosc", deadline=None, max_examples=int(os.environ.get("RELOSC_EXAMPLES", "25")),
    derandomize=True, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("relosc")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psd(rng, scale=1.0):
    """Coefficients (c0, c1, c3) of a random positive semidefinite matrix."""
    r = rng.uniform(0, scale)
    ang = rng.uniform(0, 2 * math.pi)
    return (r + rng.uniform(0, scale), r * math.sin(ang), r * math.cos(ang))
