"""Tests for the Monte Carlo ensembles and the chain pool."""

import numpy as np
import pytest

from src.core.errors import EnsembleError, UnstableActionError, ValidationError
from src.core.freeprob import semicircle_density, semicircle_resolvent
from src.core.models import EnsembleConfig
from src.services.ensembles import (
    char_poly_average,
    empirical_l1,
    empirical_resolvent,
    gaussian_sample,
    gaussian_sum_variance,
    hermite_prediction,
    histogram,
    morozov_check,
    sample,
)
from src.workers.chain_pool import ChainPool, merge_batches, run_chains_blocking


def _config(**overrides):
    base = dict(N=4, q=1, potential_coeffs=[{2: 1.0}], steps=20, burn_in=5, thinning=2, seed=3)
    base.update(overrides)
    return EnsembleConfig(**base)


def test_metropolis_chain_is_reproducible():
    first = sample(_config())
    second = sample(_config())
    assert first.labels() == ["X1"]
    assert len(first.eigenvalue_draws["X1"]) == 10
    assert all(len(d) == 4 for d in first.eigenvalue_draws["X1"])
    assert first.eigenvalue_draws == second.eigenvalue_draws
    assert 0.0 < first.acceptance_rate <= 1.0


def test_two_matrix_labels():
    batch = sample(_config(q=2, potential_coeffs=[{2: 3.0}]))
    assert batch.labels() == ["S2", "X1", "X2"]


def test_cubic_potential_is_regularized():
    batch = sample(_config(potential_coeffs=[{2: 1.0, 3: 0.2}]))
    assert batch.regularized


def test_unbounded_actions_are_rejected():
    with pytest.raises(EnsembleError):
        sample(_config(q=2, potential_coeffs=[{2: 0.5}]))
    with pytest.raises(EnsembleError):
        sample(_config(potential_coeffs=[{2: 1.0, 4: -1.0}]))
    with pytest.raises(EnsembleError):
        sample(_config(potential_coeffs=[{2: 1.0, 5: 1.0}]))
    with pytest.raises(ValueError):
        _config(q=4)


def test_gaussian_sum_variance():
    assert gaussian_sum_variance(1, 1.0, 1) == pytest.approx(1.0)
    assert gaussian_sum_variance(2, 3.0, 2) == pytest.approx(1.0)
    assert gaussian_sum_variance(2, 3.0, 1) == pytest.approx(3.0 / 8.0)
    assert gaussian_sum_variance(2, 3.0, 2, coupling_on=False) == pytest.approx(2.0 / 3.0)


def test_gaussian_sample_semicircle():
    batch = gaussian_sample(200, 10, seed=11)
    assert batch.labels() == ["X1"]
    assert empirical_l1(batch, "X1", semicircle_density(1.0)) < 0.08

    rows = histogram(batch, "X1", bins=40)
    width = rows[1][0] - rows[0][0]
    assert sum(density for _, density, _ in rows) * width == pytest.approx(1.0, abs=1e-12)


def test_gaussian_sample_sums():
    batch = gaussian_sample(100, 5, (1.0, 1.0), seed=2)
    assert batch.labels() == ["S2", "X1", "X2"]
    second_moment = lambda label: float(np.mean(np.square(batch.eigenvalue_draws[label])))  # noqa: E731
    assert second_moment("X1") == pytest.approx(1.0, abs=0.1)
    assert second_moment("S2") == pytest.approx(2.0, abs=0.2)
    assert gaussian_sample(20, 2, seed=5).eigenvalue_draws == gaussian_sample(20, 2, seed=5).eigenvalue_draws


def test_gaussian_sample_rejects():
    with pytest.raises(UnstableActionError):
        gaussian_sample(10, 2, (-1.0,))
    with pytest.raises(ValidationError):
        gaussian_sample(10, 0)


def test_empirical_resolvent():
    batch = gaussian_sample(100, 5, seed=4)
    value, stderr = empirical_resolvent(batch, "X1", 10j)
    assert value == pytest.approx(semicircle_resolvent(1.0, 10j), abs=0.01)
    assert stderr < 0.01
    with pytest.raises(ValidationError):
        empirical_resolvent(batch, "X1", 0.1 + 0.001j)
    with pytest.raises(ValidationError):
        empirical_resolvent(batch, "Y1", 10j)


def test_characteristic_polynomial_average():
    config = _config(seed=8)
    mean, stderr = char_poly_average(config, 3, 0.7)
    assert abs(mean - hermite_prediction(config, 3, 0.7)) < 5 * stderr + 1e-3
    with pytest.raises(ValidationError):
        char_poly_average(config, 7, 0.7)


def test_morozov_product_formula():
    config = _config(seed=9)
    difference, stderr = morozov_check(config, 1, 2, [0.3, -0.5])
    assert difference < 5 * stderr + 1e-3
    with pytest.raises(ValidationError):
        morozov_check(config, 1, 2, [0.3, 0.3])


async def test_chain_pool_lifecycle():
    pool = ChainPool(workers=2)
    with pytest.raises(EnsembleError):
        await pool.run_chains(_config(), [1])
    await pool.start()
    try:
        batches = await pool.run_chains(_config(), [1, 2])
    finally:
        await pool.stop()
    assert [b.seed for b in batches] == [1, 2]
    assert pool.stats["chains_finished"] == 2
    merged = merge_batches(batches)
    assert len(merged.eigenvalue_draws["X1"]) == 20


def test_blocking_pool_matches_sequential_chains():
    config = _config()
    pooled = run_chains_blocking(config, [5, 6])
    sequential = merge_batches([sample(config.model_copy(update={"seed": s})) for s in (5, 6)])
    assert pooled.eigenvalue_draws == sequential.eigenvalue_draws
    with pytest.raises(EnsembleError):
        merge_batches([])
