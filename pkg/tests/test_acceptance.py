"""Acceptance suite: one test per criterion, run at full size.

Each test prints a single ``criterion N <name>: PASS|FAIL`` line followed by
the verdicts behind it, then asserts that every verdict passed.
"""

import pytest

from qelect.harness.claims import CLAIMS, Context

CRITERIA = list(enumerate(CLAIMS, start=1))


@pytest.fixture(scope="module")
def ctx():
    # shared so criterion 5 can audit the traces produced by criteria 1-4
    return Context(seed=0)


@pytest.mark.parametrize("number,claim", CRITERIA, ids=[c for _, c in CRITERIA])
def test_criterion(number, claim, ctx, capsys):
    verdicts = CLAIMS[claim](ctx)
    ok = bool(verdicts) and all(v.passed is True for v in verdicts)
    with capsys.disabled():
        print(f"\ncriterion {number} {claim}: {'PASS' if ok else 'FAIL'}")
        for v in verdicts:
            print(f"    {v.line()}")
    failed = [v.line() for v in verdicts if v.passed is not True]
    assert ok, "; ".join(failed)
