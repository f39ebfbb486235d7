"""Acceptance criteria, one test each.

Every criterion runs at its stated tolerance; its one-line verdict is printed
and also collected for the terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` for the plain list.
"""

import pytest

from spectra.acceptance import CRITERIA, run_all, run_criterion

LINES = {}


@pytest.mark.parametrize("number", [n for n, _, _ in CRITERIA], ids=[f"{n:02d}-{t.replace(' ', '_')}" for n, t, _ in CRITERIA])
def test_criterion(number):
    result = run_criterion(number)
    LINES[number] = result.line()
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    results = run_all(print)
    raise SystemExit(0 if all(c.passed for c in results) else 1)
