"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest -s tests/test_acceptance.py`` to see the summary lines.
"""

import pytest

from responsekit import acceptance

SEED = 0


@pytest.mark.slow
@pytest.mark.parametrize("number", [c[0] for c in acceptance.CRITERIA],
                         ids=[f"criterion-{c[0]:02d}" for c in acceptance.CRITERIA])
def test_criterion(number, capsys):
    res = acceptance.run_one(number, SEED)
    with capsys.disabled():
        print("\n" + res.line() + f" {res.details}")
    assert res.passed, res.details
    assert res.within_budget, f"took {res.seconds:.1f}s, budget {res.budget:g}s"
