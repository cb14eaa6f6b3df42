import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lyapcert.polyalg import Polynomial

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_ACCEPTANCE: list = []


@pytest.fixture
def acceptance():
    """Record one acceptance line; printed in the terminal summary."""

    def record(criterion: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((criterion, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{criterion:<6} {'PASS' if ok else 'FAIL'}  {detail}")


def polynomials(nvars: int, max_degree: int = 3, max_terms: int = 6):
    """Hypothesis strategy for sparse polynomials with small integer-ish coefficients."""
    mono = st.tuples(*[st.integers(0, max_degree)] * nvars).filter(lambda m: sum(m) <= max_degree)
    coef = st.integers(-5, 5).filter(bool).map(float)
    return st.dictionaries(mono, coef, max_size=max_terms).map(lambda d: Polynomial(d, nvars))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
