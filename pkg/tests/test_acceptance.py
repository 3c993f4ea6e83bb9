"""The eleven acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary; ``conftest.py`` prints them
together at the end of the session.
"""
import pytest

from matrix_hill.verify import SUITES, run_suite

ACCEPTANCE_LINES = []

ORDER = ["free", "constant-oracle", "delta-oracle", "smoothed", "counting", "splitting",
         "identities", "spectral", "asymptotics", "reconstruction", "series"]


@pytest.mark.parametrize("suite", ORDER, ids=[f"criterion_{k:02d}_{s}" for k, s in enumerate(ORDER, 1)])
def test_criterion(suite):
    assert suite in SUITES
    res = run_suite(suite)
    line = res.line()
    ACCEPTANCE_LINES.append((res.criterion, line))
    print(line)
    assert res.passed, line
