"""Tests for the special-function kernel."""

import math

import mpmath
import pytest
from scipy import special

from src.core.errors import BranchCutError, NumericalError, ValidationError
from src.core.models import ChebKind, CutSide
from src.core.specfun import (
    airy_eval,
    cheb_inverse_check,
    cheb_jump,
    chebyshev_scaling_term,
    chebyshev_t,
    chebyshev_u,
    contour_residue,
    g_kernel,
    hermite_eval,
    jacobi_sn,
    kprime_reference,
    theta_eval,
    torus_from_band,
    w_of_sigma,
    w_of_sigma_sn,
)


def test_integer_orders_are_polynomials():
    x = 0.3
    assert chebyshev_t(2, x).real == pytest.approx(2 * x * x - 1)
    assert chebyshev_t(3, x).real == pytest.approx(4 * x**3 - 3 * x)
    assert chebyshev_u(2, x).real == pytest.approx(4 * x * x - 1)
    # integer order is continuous across the cut
    assert chebyshev_t(3, -2.0).real == pytest.approx(4 * -8.0 + 6.0)


def test_real_order_on_principal_branch():
    theta = 0.7
    assert chebyshev_t(0.5, math.cos(theta)).real == pytest.approx(math.cos(0.35), abs=1e-14)
    value = chebyshev_u(0.5, math.cos(theta))
    assert value.real == pytest.approx(math.sin(1.5 * theta) / math.sin(theta), abs=1e-13)


def test_cut_needs_a_side():
    with pytest.raises(BranchCutError):
        chebyshev_t(0.5, -2.0)
    with pytest.raises(ValidationError):
        chebyshev_t(0.5, float("nan"))


@pytest.mark.parametrize("kind", [ChebKind.FIRST, ChebKind.SECOND])
def test_jump_across_cut(kind):
    nu, x = 0.4, -1.7
    fn = chebyshev_t if kind == ChebKind.FIRST else chebyshev_u
    jump = fn(nu, x, CutSide.PLUS) - fn(nu, x, CutSide.MINUS)
    assert jump == pytest.approx(cheb_jump(kind, nu, x), abs=1e-12)


def test_chebyshev_inverse():
    assert cheb_inverse_check(0.5, 0.3) < 1e-12
    assert cheb_inverse_check(2, 0.3) < 1e-12
    with pytest.raises(ValidationError):
        cheb_inverse_check(0, 0.3)


def test_scaling_term():
    assert chebyshev_scaling_term(0.0, 1, 1, 2.0, 1.0, 1.0, 0.0).real == pytest.approx(-2.0, abs=1e-13)
    value = chebyshev_scaling_term(0.5, 1, -1, 2.0, -1.0, 0.0, 1.0)
    expected = 2.0**1.5 * math.sin(2.5 * math.pi / 3) / math.sin(math.pi / 3)
    assert value.real == pytest.approx(expected, abs=1e-12)


def test_theta_matches_mpmath():
    tau = 1.1j
    nome = mpmath.exp(-math.pi * 1.1)
    u = 0.3 + 0.1j
    for j in (1, 2, 3, 4):
        expected = complex(mpmath.jtheta(j, u, nome))
        assert theta_eval(j, u, tau) == pytest.approx(expected, rel=1e-12)


def test_theta_identities():
    tau = 0.8j
    th2, th3, th4 = (theta_eval(j, 0.0, tau) for j in (2, 3, 4))
    assert th3**4 == pytest.approx(th2**4 + th4**4, rel=1e-13)
    assert theta_eval(1, 0.0, tau, derivative=1) == pytest.approx(th2 * th3 * th4, rel=1e-13)
    with pytest.raises(ValidationError):
        theta_eval(1, 0.0, -1j)


def test_torus_periods():
    torus = torus_from_band(1.0, 2.0)
    assert torus.K == pytest.approx(float(special.ellipk(0.25)), rel=1e-10)
    assert torus.Kprime == pytest.approx(kprime_reference(0.5), rel=1e-10)
    with pytest.raises(ValidationError):
        torus_from_band(2.0, 1.0)


def test_jacobi_sn():
    k = 0.6
    sn, _, _, _ = special.ellipj(0.4, k * k)
    assert jacobi_sn(0.4, k).real == pytest.approx(sn, rel=1e-9)


def test_w_of_sigma_two_ways():
    torus = torus_from_band(1.0, 2.0)
    for sigma in (0.13, 0.31, 0.77):
        assert w_of_sigma(torus, sigma).real == pytest.approx(w_of_sigma_sn(torus, sigma), rel=1e-9)


def test_g_kernel():
    nu, tau = 0.4, 1.2j
    sigma = 0.23 + 0.31j
    assert contour_residue(lambda s: g_kernel(s, nu, tau), 0.0) == pytest.approx(1.0, abs=1e-6)
    shifted = g_kernel(sigma + 1.0, nu, tau)
    assert shifted == pytest.approx(complex(mpmath.exp(1j * math.pi * nu)) * g_kernel(sigma, nu, tau), rel=1e-10)
    assert g_kernel(sigma + tau, nu, tau) == pytest.approx(g_kernel(sigma, nu, tau), rel=1e-10)
    with pytest.raises(ValidationError):
        g_kernel(1.0 + tau, nu, tau)


@pytest.mark.parametrize("x", [-9.0, -5.5, -1.0, 0.0, 0.8, 3.0, 5.5, 7.5])
def test_airy_against_scipy(x):
    assert airy_eval(x) == pytest.approx(special.airy(x)[0], abs=1e-10)


def test_airy_range():
    with pytest.raises(NumericalError):
        airy_eval(100.0)


def test_hermite():
    x = 0.7
    assert hermite_eval(0, x) == 1.0
    assert hermite_eval(3, x) == pytest.approx(8 * x**3 - 12 * x)
    assert hermite_eval(10, x) == pytest.approx(special.eval_hermite(10, x), rel=1e-12)
    with pytest.raises(ValidationError):
        hermite_eval(-1, x)
