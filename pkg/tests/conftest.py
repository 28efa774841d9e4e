import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "neflab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("neflab")

ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Acceptance tests call this with (number, title, passed, detail)."""

    def _record(number, title, passed, detail=""):
        ACCEPTANCE[number] = (title, bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number}. {title}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
