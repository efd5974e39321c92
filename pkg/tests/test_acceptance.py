"""Acceptance criteria 1-11, one test each.

Every test prints a single PASS/FAIL line; the lines are also repeated in
the terminal summary so they appear in captured runs.
"""
import pytest

from pathframes.acceptance import CHECKS

RESULTS = []


@pytest.mark.parametrize("criterion", sorted(CHECKS), ids=lambda i: f"criterion_{i:02d}")
def test_criterion(criterion):
    result = CHECKS[criterion]()
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.line()
