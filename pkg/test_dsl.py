"""Tests for the double-scaling operator algebra."""

import random

import numpy as np
import pytest
import sympy

from src.core.dsl import (
    DEFAULT_RING,
    DifferentialOperator,
    SUPPORTED_PAIRS,
    airy_residual,
    chebyshev_background,
    companion_curve,
    lax_pair,
    multiplication,
    op_commutator,
    op_mul,
    pair_residual,
    painleve_constraint,
    partial_power,
    reduce_order,
    semiclassical_curve,
    spectral_curve_of,
    string_relations,
    string_residual,
    transform,
    zero_curvature,
)
from src.core.errors import UnsupportedCaseError, ValidationError
from src.core.models import TransformKind
from src.core.polynomials import X, Y

R = DEFAULT_RING
t, g = R.t, R.gs
u2, v2 = R.u(2), R.v(2)
dv = R.D(v2)
ddv = R.D(v2, 2)


def _random_operator(rng: random.Random):
    pool = [sympy.Integer(1), t, t**2, u2, v2, R.D(u2), sympy.Rational(3, 2), u2 * v2]
    terms = {k: rng.choice(pool) * rng.randint(-3, 3) for k in range(rng.randint(0, 3))}
    terms[rng.randint(0, 3)] = rng.choice(pool)
    return DifferentialOperator(terms=terms)


def test_commutator_basics():
    d = partial_power(1)
    assert op_commutator(d, multiplication(u2)) == multiplication(g * R.D(u2))
    A = partial_power(2) + multiplication(u2)
    assert op_commutator(A, A).is_zero

    P = 2 * partial_power(2) + multiplication(u2)
    assert op_commutator(P, d) == multiplication(-g * R.D(u2))


def test_multiplication_is_associative():
    rng = random.Random(11)
    for _ in range(8):
        A, B, C = (_random_operator(rng) for _ in range(3))
        assert op_mul(op_mul(A, B), C) == op_mul(A, op_mul(B, C))


def test_transpose_is_antihomomorphism():
    rng = random.Random(5)
    for _ in range(8):
        A, B = _random_operator(rng), _random_operator(rng)
        assert op_mul(A, B).transpose() == op_mul(B.transpose(), A.transpose())
        assert A.transpose().transpose() == A


def test_string_residual_pure_airy():
    raw = string_residual(2, 1)
    assert raw.residual == multiplication(-g * R.D(u2) - g)
    assert string_residual(2, 1, {"u2": -t}).vanishes


def test_string_residual_pure_gravity():
    result = string_residual(3, 2, string_relations(3, 2))
    assert set(result.residual.terms) == {0}
    expected = g**3 * R.D(v2, 3) + 3 * g * v2 * dv - g
    assert sympy.expand(result.residual.coefficient(0) - expected) == 0
    assert sympy.expand(painleve_constraint() - expected) == 0


def test_string_residual_higher_pairs():
    ising = string_residual(4, 3, string_relations(4, 3))
    assert 0 < len(ising.constraints) and ising.residual.order <= 2

    yang_lee = string_residual(5, 2, {"u2": 20 * v2, "u3": 30 * g * dv, "u5": v2 * g * dv / 2})
    assert yang_lee.constraints
    assert yang_lee.residual.order <= 2

    with pytest.raises(UnsupportedCaseError):
        string_residual(5, 3)


def test_charge_conjugation_is_involution():
    pair = lax_pair(3, 2)
    twice = transform(TransformKind.CHARGE_CONJUGATION, transform(TransformKind.CHARGE_CONJUGATION, pair))
    assert twice.P == pair.P and twice.Q == pair.Q


def test_linear_canonical():
    pair = lax_pair(3, 2).subs(string_relations(3, 2))
    same = transform(TransformKind.LINEAR_CANONICAL, pair, 1, 0, 0, 1)
    assert same.P == pair.P and same.Q == pair.Q

    sheared = transform(TransformKind.LINEAR_CANONICAL, pair, 1, 1, 0, 1)
    assert pair_residual(sheared) == pair_residual(pair)

    with pytest.raises(ValidationError):
        transform(TransformKind.LINEAR_CANONICAL, pair, 2, 0, 0, 1)


@pytest.mark.parametrize("p,pprime", SUPPORTED_PAIRS)
def test_duality_preserves_string_residual(p, pprime):
    pair = lax_pair(p, pprime).subs(string_relations(p, pprime))
    dual = transform(TransformKind.DUALITY, pair)
    assert (dual.p, dual.pprime) == (pprime, p)
    assert dual.P.order == pprime and dual.Q.order == p
    assert pair_residual(dual) == pair_residual(pair).transpose()


def test_reduce_order_airy():
    P = lax_pair(2, 1).P
    assert reduce_order(P, 1) == {1: 1}
    reduced = reduce_order(P, 2)
    assert sympy.expand(reduced[0] - (R.zeta - u2) / 2) == 0
    assert 1 not in reduced


def test_companion_curve_airy():
    curve = companion_curve(2, 1)
    assert sympy.expand(curve.as_expr() - (Y**2 - (X + t) / 2)) == 0


def test_companion_curve_pure_gravity():
    curve = companion_curve(3, 2)
    vdot, vddot = g * dv, g**2 * ddv
    expected = (
        Y**3
        - X**2 / 2
        - Y * (sympy.Rational(3, 4) * v2**2 + vddot / 2)
        - v2**3 / 4
        - v2 * vddot / 4
        + vdot**2 / 8
    )
    assert sympy.expand(curve.as_expr() - expected) == 0


def test_pure_gravity_semiclassical_limit():
    curve = companion_curve(3, 2, {"u2": -3, "u3": 0, "v2": -1}, numeric=True)
    expected = Y**3 - X**2 / 2 - sympy.Rational(3, 4) * Y + sympy.Rational(1, 4)
    assert sympy.expand(curve.as_expr() - expected) == 0
    assert sympy.expand(semiclassical_curve(3, 2).as_expr() - expected) == 0


@pytest.mark.parametrize("p,pprime", list(SUPPORTED_PAIRS) + [(7, 2), (5, 3)])
def test_semiclassical_curve_matches_companion(p, pprime):
    curve = semiclassical_curve(p, pprime, verify=True)
    assert curve.coefficient(0, p) == 1


def test_semiclassical_curve_rejects_common_factor():
    with pytest.raises(UnsupportedCaseError):
        semiclassical_curve(4, 2)


def test_chebyshev_background_values():
    bg = chebyshev_background(3, 2)
    assert bg[R.u(2)] == -3 and bg[R.u(3)] == 0 and bg[v2] == -1


@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_p1_curves_are_monic(p):
    curve = spectral_curve_of(lax_pair(p, 1))
    assert curve.degrees[1] == p
    assert curve.coefficient(0, p) == 1


def test_zero_curvature():
    airy = lax_pair(2, 1).subs({"u2": -t})
    assert zero_curvature(airy) == sympy.zeros(2, 2)

    gravity = lax_pair(3, 2).subs(string_relations(3, 2))
    third = sympy.solve(painleve_constraint(), R.D(v2, 3))[0]
    res = zero_curvature(gravity).applyfunc(lambda e: sympy.expand(e.subs(R.D(v2, 3), third)))
    assert res == sympy.zeros(3, 3)


def test_airy_residual():
    grid = np.linspace(-1.0, 1.0, 21)
    assert airy_residual(1.0, grid, 0.5) < 1e-6
    assert airy_residual(0.5, grid, 0.5) < 1e-6

    shifted = airy_residual(1.0, grid - 0.25, 0.75)
    assert shifted == pytest.approx(airy_residual(1.0, grid, 0.5), abs=1e-9)

    with pytest.raises(ValidationError):
        airy_residual(0.0, grid, 0.5)


def test_text_form():
    A = partial_power(2) + multiplication(u2)
    assert str(A) == "(1)*D^2 + (u2(t))*D^0"
