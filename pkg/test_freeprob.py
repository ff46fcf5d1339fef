"""Tests for planar-limit analytics."""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.core.errors import SeriesError, ValidationError
from src.core.freeprob import (
    density_from_stieltjes,
    density_mass,
    density_moment,
    free_convolve,
    free_sum_inverse,
    l1_distance,
    moments_from_r_transform,
    moments_of_disk,
    one_cut_solve,
    point_mass_moments,
    quartic_density,
    quartic_dimensionless,
    quartic_disk,
    quartic_edge_squared,
    r_transform_series,
    resolvent_from_r,
    scaling_expand_quartic,
    semicircle_density,
    semicircle_moments,
    semicircle_resolvent,
    stieltjes_of_density,
)
from src.core.maps import tutte_series_moments
from src.core.models import TruncatedSeries


def test_semicircle_normalization():
    rho = semicircle_density(1.0)
    assert rho.support == (-2.0, 2.0)
    assert density_mass(rho) == pytest.approx(1.0, abs=1e-8)
    assert density_moment(rho, 2) == pytest.approx(1.0, abs=1e-8)
    assert density_moment(semicircle_density(2.0), 4) == pytest.approx(2 * 0.25, abs=1e-8)
    with pytest.raises(ValidationError):
        semicircle_density(0.0)


def test_stieltjes_round_trip_on_semicircle():
    rho = semicircle_density(1.0)
    z = 3.0 + 1.0j
    assert stieltjes_of_density(rho, z) == pytest.approx(semicircle_resolvent(1.0, z), abs=1e-8)
    value = density_from_stieltjes(lambda w: semicircle_resolvent(1.0, w), 0.5)
    assert value == pytest.approx(float(rho(0.5)), abs=1e-6)
    with pytest.raises(ValidationError):
        stieltjes_of_density(rho, 0.5)


def test_quartic_edge():
    assert quartic_edge_squared(1.0, 0.0) == pytest.approx(4.0)
    assert quartic_edge_squared(1.0, -1.0 / 12.0) == pytest.approx(8.0, abs=1e-12)
    with pytest.raises(ValidationError):
        quartic_edge_squared(1.0, -0.1)


def test_quartic_density_and_disk():
    assert density_mass(quartic_density(1.0, 1.0)) == pytest.approx(1.0, abs=1e-8)
    assert 50.0 * quartic_disk(1.0, 1.0, 50.0) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValidationError):
        quartic_disk(1.0, 1.0, 0.1)


def test_free_cumulants():
    moments = semicircle_moments(Fraction(1), 9)
    assert moments.coefficients[:7] == [1, 0, 1, 0, 2, 0, 5]
    r = r_transform_series(moments)
    assert r.coefficients[:4] == [0, 1, 0, 0]

    shift = r_transform_series(point_mass_moments(Fraction(2), 6))
    assert shift.coefficients == [2, 0, 0, 0, 0]

    with pytest.raises(SeriesError):
        r_transform_series(point_mass_moments(Fraction(2), 6).model_copy(update={"coefficients": [2, 1]}))


def test_free_convolution_of_semicircles():
    rho = free_convolve(semicircle_density(1.0), semicircle_density(1.0))
    target = semicircle_density(0.5)
    assert l1_distance(rho, target, -3.5, 3.5) < 0.02


def test_r_inversion_near_the_edge():
    # R(w) = 2w is the semicircle of variance 2, with edges at +-2 sqrt(2)
    r = TruncatedSeries(coefficients=[0.0, 2.0], truncation_order=2)
    for z in (-2.818 + 1e-4j, 2.82 + 1e-6j, 1.0 + 1e-6j, 5.0 + 0.0j):
        assert resolvent_from_r(r, z) == pytest.approx(semicircle_resolvent(0.5, z), abs=1e-9)


def test_point_mass_shifts_the_law():
    shifted = free_convolve(point_mass_moments(0.5, 17), semicircle_density(1.0))
    base = semicircle_density(1.0)
    assert l1_distance(lambda x: shifted(np.asarray(x) + 0.5), base, -2.0, 2.0) < 0.01


def test_scaling_coefficients():
    mu, muB = 1.0, 0.5
    series = scaling_expand_quartic(0.05, mu, muB)
    assert series.coefficient(0) == pytest.approx(math.sqrt(2) / 3, abs=1e-8)
    assert series.coefficient(1) == pytest.approx(-muB / math.sqrt(2), abs=1e-8)
    c32 = math.sqrt(2) / 3 * (2 * muB - 1) * math.sqrt(muB + 1)
    assert series.coefficient(Fraction(3, 2)) == pytest.approx(c32, abs=1e-8)


@pytest.mark.parametrize("muB", [-0.5, 0.0, 0.7, 1.6])
def test_chebyshev_form_of_scaling_limit(muB):
    zeta, Q = quartic_dimensionless(scaling_expand_quartic(0.05, 1.0, muB), 1.0, muB)
    assert 4 * zeta**3 - 3 * zeta == pytest.approx(2 * Q * Q - 1, abs=1e-6)


def test_scaling_preconditions():
    with pytest.raises(ValidationError):
        scaling_expand_quartic(0.5, 1.0, 0.0)
    with pytest.raises(ValidationError):
        scaling_expand_quartic(0.05, 1.0, -1.5)


def test_one_cut_gaussian():
    sol = one_cut_solve([0.0, 1.0])
    assert sol.support == pytest.approx((-2.0, 2.0), abs=1e-10)
    z = 2.5 + 0.5j
    assert sol.resolvent(z) == pytest.approx(semicircle_resolvent(1.0, z), abs=1e-10)


def test_free_sum_inverse_of_semicircles():
    z = 3.0 + 1.0j
    w = semicircle_resolvent(0.5, z)

    def inverse(v):
        return 1.0 / v + v

    assert free_sum_inverse([inverse, inverse], w) == pytest.approx(z, abs=1e-12)


def test_moments_from_contour():
    def W(z):
        return semicircle_resolvent(1.0, z)

    assert moments_of_disk(W, 4, 3.0) == pytest.approx(2.0, abs=1e-10)
    assert moments_of_disk(W, 3, 3.0) == pytest.approx(0.0, abs=1e-9)


def test_quartic_moment_matches_tutte_series():
    t4 = 1e-3
    series = tutte_series_moments(5).coefficients
    expected = sum(float(c) * t4**n for n, c in enumerate(series))
    second = moments_of_disk(lambda z: quartic_disk(1.0, t4, z), 2, 3.0)
    assert second == pytest.approx(expected, abs=1e-8)


def test_moments_from_r_transform_inverts_cumulants():
    moments = semicircle_moments(Fraction(1), 9)
    rebuilt = moments_from_r_transform(r_transform_series(moments), 8)
    assert rebuilt.coefficients == [1, 0, 1, 0, 2, 0, 5, 0]

    shift = r_transform_series(point_mass_moments(Fraction(2), 6))
    assert moments_from_r_transform(shift, 5).coefficients == [1, 2, 4, 8, 16]
