"""The fifteen acceptance criteria, each run at its stated tolerance.

Every test prints one PASS/FAIL line (visible with ``pytest -s``). Failing
criteria are reported as failures; nothing here is marked expected-to-fail.
"""

import pytest

from gravdeco.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [n for n, _, _ in CRITERIA], ids=[f"c{n:02d}_{t.replace(' ', '_')}" for n, t, _ in CRITERIA])
def test_criterion(number):
    result = run_criterion(number)
    print(result.line())
    assert result.passed, f"{result.line()}\n{result.detail}"


def test_normalization_runs_under_one_second():
    assert run_criterion(1).seconds < 1.0


def test_all_fifteen_criteria_are_registered():
    assert [n for n, _, _ in CRITERIA] == list(range(1, 16))
