"""Tests for the acceptance report runner."""

import pytest

from src.core.errors import PottsError, ValidationError
from src.services import acceptance
from src.services.acceptance import AcceptanceOptions, run_acceptance


def test_exact_criteria_pass():
    results = run_acceptance([17, 2, 7, 3])
    assert [r.criterion for r in results] == [2, 3, 7, 17]
    assert all(r.passed for r in results), [r.detail for r in results if not r.passed]
    assert all(r.seconds >= 0.0 for r in results)


def test_unknown_criterion():
    with pytest.raises(ValidationError):
        run_acceptance([0])
    with pytest.raises(ValidationError):
        run_acceptance([18])


def test_failing_check_is_reported(monkeypatch):
    def boom(opts):
        raise PottsError("no real critical point")

    monkeypatch.setitem(acceptance.CHECKS, 6, boom)
    (result,) = run_acceptance([6], AcceptanceOptions(N=8, draws=1))
    assert not result.passed
    assert result.measured is None
    assert "no real critical point" in result.detail

def test_crashing_check_does_not_abort_the_report(monkeypatch):
    def broken(opts):
        raise ValueError("f(a) and f(b) must have different signs")

    monkeypatch.setitem(acceptance.CHECKS, 6, broken)
    results = run_acceptance([6, 7], AcceptanceOptions(N=8, draws=1))
    assert [r.criterion for r in results] == [6, 7]
    assert not results[0].passed
    assert "ValueError" in results[0].detail
    assert results[1].passed


def test_free_convolution_criterion():
    (result,) = run_acceptance([5], AcceptanceOptions(N=512, draws=25))
    assert result.passed, result.detail
    assert result.measured < 0.05


@pytest.mark.parametrize("criterion", [8, 10, 16])
def test_deterministic_criteria_pass(criterion):
    (result,) = run_acceptance([criterion])
    assert result.passed, result.detail
