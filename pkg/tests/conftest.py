import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one PASS/FAIL line; all lines are repeated in the terminal summary."""
    def record(criterion: str, ok: bool, detail: str, status: str | None = None):
        line = f"[{status or ('PASS' if ok else 'FAIL')}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dcp(rng, lo=0.1, hi=2.0):
    from ipsdual.lattice import DcpParams
    return DcpParams(*rng.uniform(lo, hi, 6))


def random_gdcp(rng, annihilating=False, mu2=None):
    from ipsdual.lattice import GdcpParams
    a, b, g, d, lam, D = rng.uniform(0.1, 2.0, 6)
    m2 = rng.uniform(0.1, 2.0) if mu2 is None else mu2
    if annihilating:
        m1 = lam + m2
    else:
        m1 = rng.uniform(max(0.0, m2 - D), lam + m2)
    return GdcpParams(alpha=a, beta=b, gamma=g, delta=d, lam=lam, diffusion=D, mu1=m1, mu2=m2)
