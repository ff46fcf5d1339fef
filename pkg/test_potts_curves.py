"""Tests for Potts spectral curves and the Y-resolvent."""

import math

import numpy as np
import pytest
import sympy
from scipy.integrate import trapezoid

from src.core.errors import UnsupportedCaseError, ValidationError
from src.core.freeprob import one_cut_solve, semicircle_resolvent, subordinate_with_semicircle
from src.core.polynomials import T3, T4, X, Y, BivariatePolynomial
from src.core.potts_curves import (
    EllipticResolvent,
    chebyshev_scaling_profile,
    critical_points,
    curve_samples,
    curve_template,
    discriminant_nodes,
    dual_inverse_residual,
    dual_relation_check,
    e_polynomial,
    elliptic_WY,
    fix_constants,
    g_transform,
    kpz,
    nu_gamma,
    resolvent_from_curve,
    scaling_coefficient,
    singular_points,
    two_matrix_parametrization,
)


@pytest.fixture(scope="module")
def ising_wy():
    return EllipticResolvent(elliptic_WY(2, 4.0, 0.2))


@pytest.fixture(scope="module")
def gravity_wy():
    return EllipticResolvent(elliptic_WY(1, 3.0, 0.3))


def test_exponents():
    for q, (nu, gamma) in {1: (2 / 3, -1 / 2), 2: (1 / 2, -1 / 3), 3: (1 / 3, -1 / 5)}.items():
        got_nu, got_gamma = nu_gamma(q)
        assert got_nu == pytest.approx(nu, abs=1e-12)
        assert got_gamma == pytest.approx(gamma, abs=1e-12)
    assert kpz(0.0) == pytest.approx(-1 / 2)
    assert kpz(0.5) == pytest.approx(-1 / 3)
    assert kpz(0.8) == pytest.approx(-1 / 5)
    assert nu_gamma(4) == (0.0, 0.0)
    assert kpz(1.0) == 0.0
    with pytest.raises(ValidationError):
        nu_gamma(4.5)
    with pytest.raises(ValidationError):
        kpz(2.0)


def test_template_coefficients():
    ising = curve_template(2, 1, 1)
    assert ising.coefficient(2, 2) == 1
    assert sympy.simplify(ising.coefficient(0, 3) + 1 / T3) == 0

    gravity = curve_template(1, 2, 1)
    assert sympy.simplify(gravity.coefficient(0, 2) - 1 / T4) == 0

    potts = curve_template(3, 1, 3)
    assert sympy.simplify(potts.coefficient(0, 5) - 108 / T3) == 0
    assert len(curve_template(3, 1, 1).constants) == 10

    with pytest.raises(UnsupportedCaseError):
        curve_template(4, 1, 1)


def test_ising_e_polynomial_is_symmetric():
    E = e_polynomial(curve_template(2, 1, 1))
    assert sympy.simplify(E.as_expr() - E.swap().as_expr()) == 0
    assert sympy.simplify(E.coefficient(2, 2) + T3) == 0


def test_discriminant_nodes_of_nodal_cubic():
    curve = BivariatePolynomial.from_expr(Y**2 - X**2 * (X + 1))
    nodes = dict((round(r.real, 9), m) for r, m in discriminant_nodes(curve))
    assert nodes == {-1.0: 1, 0.0: 2}


def test_singular_points():
    nodal = BivariatePolynomial.from_expr(Y**2 - X**2 * (X + 1))
    ((x0, y0),) = singular_points(nodal)
    assert abs(x0) < 1e-10 and abs(y0) < 1e-10
    assert singular_points(BivariatePolynomial.from_expr(X**2 + Y**2 - 1)) == []


def test_two_matrix_domain():
    with pytest.raises(ValidationError):
        two_matrix_parametrization(2.0, 0.1)


def test_two_matrix_resolvent_is_normalized():
    tm = two_matrix_parametrization(4.0, 0.2)
    for x in (300.0, 200.0j, -250.0 + 50.0j):
        assert x * tm.resolvent(x) == pytest.approx(1.0, abs=2e-2)


def test_fix_constants_gravity():
    fixed = fix_constants(curve_template(1, 2, 1), 1, 2, 3.0, 0.2, t4=0.3)
    assert fixed.is_numeric
    xs, ys = curve_samples(1, 2, 1, 3.0, 0.2, 0.3, phase=0.9)
    assert fixed.relative_residual(xs, ys) < 1e-8
    assert abs(complex(sympy.N(fixed.coefficient(0, 1)))) < 1e-6


def test_fix_constants_ising_symmetric_e():
    fixed = fix_constants(curve_template(2, 1, 1), 2, 1, 4.0, 0.2)
    E = e_polynomial(fixed)
    for (i, j), c in E.numeric_coefficients().items():
        assert complex(c) == pytest.approx(complex(E.numeric_coefficients().get((j, i), 0.0)), abs=1e-7)


@pytest.mark.parametrize(
    "q, k, t2, t3, t4",
    [(2, 1, 4.0, 0.2, 0.0), (1, 2, 3.0, 0.2, 0.3)],
)
def test_fixed_curve_holds_far_out(q, k, t2, t3, t4):
    fixed = fix_constants(curve_template(q, k, 1), q, k, t2, t3, t4=t4)
    xs, ys = curve_samples(q, k, 1, t2, t3, t4, phase=0.8, far=True)
    assert fixed.relative_residual(xs, ys) < 1e-9
    for x0, y0 in singular_points(fixed):
        assert fixed.relative_residual([x0], [y0]) < 1e-8


def test_elliptic_normalization(ising_wy, gravity_wy):
    for ev in (ising_wy, gravity_wy):
        for radius in (1e7, 1e8, 1e9):
            z = radius * np.exp(0.7j)
            assert z * ev(z) == pytest.approx(1.0, abs=1e-6)


def test_elliptic_density(gravity_wy):
    lo, hi = gravity_wy.data.band
    xs = np.linspace(lo, hi, 2001)
    rho = gravity_wy.density(xs)
    assert rho.min() >= -1e-8
    assert trapezoid(rho, xs) == pytest.approx(1.0, abs=1e-3)
    x = 0.5 * (lo + hi)
    assert -gravity_wy.boundary(x, "plus").imag / math.pi == pytest.approx(gravity_wy.density(x), rel=1e-4)


def test_pure_gravity_matches_subordination(gravity_wy):
    sol = one_cut_solve([0.0, 2.0, 0.3])
    for z in (3.0 + 1.0j, -1.0 + 2.0j, 5.0):
        assert gravity_wy(z) == pytest.approx(subordinate_with_semicircle(sol.resolvent, z), abs=1e-8)


def test_pure_gravity_both_branches(gravity_wy):
    sol = one_cut_solve([0.0, 2.0, 0.3])
    x = 4.0 + 0.5j
    expected = sol.resolvent(x)
    assert resolvent_from_curve(gravity_wy, 1, x, "identity") == pytest.approx(expected, abs=1e-8)
    assert resolvent_from_curve(gravity_wy, 1, x, "potential") == pytest.approx(expected, abs=1e-8)


def test_ising_branch_matches_parametrization(ising_wy):
    tm = two_matrix_parametrization(4.0, 0.2)
    x = 3.0 + 1.0j
    assert resolvent_from_curve(ising_wy, 1, x, "potential") == pytest.approx(tm.resolvent(x), abs=1e-7)


def test_small_coupling_approaches_semicircle():
    ev = EllipticResolvent(elliptic_WY(1, 3.0, 0.01))
    # Y is close to a semicircle of variance t2/(t2 - q)
    for z in (4.0j, 3.0 + 1.0j):
        assert ev(z) == pytest.approx(semicircle_resolvent(2.0 / 3.0, z), abs=5e-2)


def test_g_transform_limits(ising_wy):
    z = 2.0 + 1.5j
    assert g_transform(ising_wy, 0, 2, z) == pytest.approx(ising_wy(z))
    assert g_transform(ising_wy, 2, 2, z) == pytest.approx(z - ising_wy.second_sheet(z))


def test_dual_inverse(ising_wy):
    grid = [3.0 + 0.5j, -2.5 + 1.0j, 4.0j]
    assert dual_inverse_residual(ising_wy, 1, grid) < 1e-8


def test_dual_relation_on_fixed_ising_curve():
    fixed = fix_constants(curve_template(2, 1, 1), 2, 1, 4.0, 0.2)
    tm = two_matrix_parametrization(4.0, 0.2)

    def G(z):
        return tm.vprime(z) + z - tm.resolvent(z)

    assert dual_relation_check(fixed, G, [3.0 + 1.0j, -2.0 + 2.0j, 5.0j]) < 1e-7


def test_dual_relation_toy():
    curve = BivariatePolynomial.from_expr(Y - 2 * X)
    assert dual_relation_check(curve, lambda z: 2 * z, [1.0, 2.0j, -3.0]) == pytest.approx(0.0, abs=1e-15)


def test_collocation_agrees_with_parametrization():
    template = curve_template(2, 1, 1)
    fixed = fix_constants(template, 2, 1, 4.0, 0.2)
    xs, ys = curve_samples(2, 1, 1, 4.0, 0.2, source="elliptic")
    assert fixed.relative_residual(xs, ys) < 1e-6


def test_critical_points_closed_forms():
    cp1 = critical_points(1)
    assert cp1.t2c == pytest.approx(1 + 2 * math.sqrt(3), abs=1e-9)
    assert cp1.t3c == pytest.approx(math.sqrt(2), abs=1e-9)
    assert cp1.gamma_s == "-1/2"

    cp2 = critical_points(2)
    assert cp2.t2c == pytest.approx(2 + 2 * math.sqrt(7), abs=1e-9)
    assert cp2.t3c == pytest.approx(math.sqrt(10), abs=1e-9)
    assert cp2.nu == "1/2"

    cp3 = critical_points(3)
    assert cp3.t2c == pytest.approx(3 + math.sqrt(47), abs=1e-9)
    assert cp3.t3c == pytest.approx(math.sqrt(105) / 2, abs=1e-9)
    assert cp3.gamma_s == "-1/5"
    assert (cp3.t2c, -cp3.t3c) in [tuple(b) for b in cp3.branches]


def test_scaling_exponents():
    fit1 = scaling_coefficient(1)
    assert fit1.exponent == pytest.approx(2 / 3, abs=0.02)
    assert fit1.profile_ratio == pytest.approx(fit1.expected_profile_ratio, rel=0.02)
    assert fit1.expected_profile_ratio == pytest.approx(0.5321, abs=1e-3)

    fit2 = scaling_coefficient(2)
    assert fit2.exponent == pytest.approx(3 / 4, abs=0.02)
    assert fit2.profile_ratio is None

    with pytest.raises(UnsupportedCaseError):
        scaling_coefficient(3)


def test_chebyshev_scaling_profile():
    assert chebyshev_scaling_profile(2, 0, 0.25) == pytest.approx(math.cos(1.5 * math.acos(0.5)))
    assert chebyshev_scaling_profile(2, 1, 1.0) == pytest.approx(1.5)
    with pytest.raises(ValidationError):
        chebyshev_scaling_profile(2, 1, 1.5)
