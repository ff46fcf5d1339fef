"""Tests for generalized Wronskians, charge conjugation and Kac-table data."""

import math

import pytest
import sympy

from src.core.dsl import DEFAULT_RING, chebyshev_background, companion_matrices, lax_pair, string_relations
from src.core.errors import UnsupportedCaseError, ValidationError, WronskianError
from src.core.polynomials import X, Y
from src.core.wronskian import (
    WronskModuleElem,
    additive_compound,
    bdry_entropy_check,
    char_polys,
    charge_conjugate,
    chebyshev_normal_form,
    conjugation_matrix,
    conjugation_residual,
    diagram,
    kac_branch_check,
    lax_matrices,
    lr_expand,
    pieri,
    quantum_dimension,
    semiclassical_factor,
    sort_rows,
    spectral_duality_check,
    wronskian_system,
    young_basis,
)

R = DEFAULT_RING
g, zeta = R.gs, R.zeta
u2, u3, v2 = R.u(2), R.u(3), R.v(2)
ISING_BACKGROUND = {"u2": sympy.Rational(-8, 3), "u3": 0, "u4": 1, "v2": -1, "v3": 0}


def _rows(basis):
    return [lam.rows for lam in basis]


def test_young_basis_order():
    assert _rows(young_basis(4, 2)) == [(), (1,), (2,), (1, 1), (2, 1), (2, 2)]
    assert _rows(young_basis(5, 2)) == [
        (),
        (1,),
        (2,),
        (1, 1),
        (3,),
        (2, 1),
        (3, 1),
        (2, 2),
        (3, 2),
        (3, 3),
    ]
    assert _rows(young_basis(3, 3)) == [()]


@pytest.mark.parametrize("p", range(2, 9))
def test_young_basis_sizes(p):
    for n in range(1, p + 1):
        basis = young_basis(p, n)
        assert len(basis) == math.comb(p, n)
        assert all(lam.fits(p, n) for lam in basis)


def test_young_basis_rejects_bad_n():
    with pytest.raises(WronskianError):
        young_basis(3, 0)
    with pytest.raises(WronskianError):
        young_basis(3, 4)


def test_sort_rows():
    assert sort_rows((2, 0)) == (1, diagram([1]))
    assert sort_rows((0, 2)) == (-1, diagram([1]))
    assert sort_rows((1, 1)) == (0, None)


def test_pieri_and_lr():
    assert set(pieri(diagram([1]), 1, 2)) == {diagram([2]), diagram([1, 1])}
    assert pieri(diagram([1]), 1, 1) == [diagram([2])]
    assert lr_expand(diagram([1]), diagram([1]), 2) == {diagram([2]): 1, diagram([1, 1]): 1}

    square = lr_expand(diagram([2, 1]), diagram([2, 1]), 3)
    assert square == {
        diagram([4, 2]): 1,
        diagram([4, 1, 1]): 1,
        diagram([3, 3]): 1,
        diagram([3, 2, 1]): 2,
        diagram([2, 2, 2]): 1,
    }


def test_module_element_validates_basis():
    with pytest.raises(ValueError):
        WronskModuleElem(p=3, n=2, coefficients={diagram([2]): 1})
    elem = WronskModuleElem(p=3, n=2, coefficients={diagram([1]): 0, diagram(): 2})
    assert list(elem.coefficients) == [diagram()]


def test_pure_gravity_matrices():
    B, _ = lax_matrices(3, 2, 2, substitutions={})
    expected = sympy.Matrix([[0, 4, 0], [-u2, 0, 4], [u3 - zeta, 0, 0]]) / 4
    assert (B - expected).applyfunc(sympy.expand) == sympy.zeros(3, 3)

    _, Qm = lax_matrices(3, 2, 2)
    vdot, vddot = g * R.D(v2), g**2 * R.D(v2, 2)
    expected_q = (
        sympy.Matrix(
            [
                [2 * v2, 0, -8],
                [-vdot + 2 * zeta, 2 * v2, 0],
                [-vddot, vdot + 2 * zeta, -4 * v2],
            ]
        )
        / 4
    )
    assert (Qm - expected_q).applyfunc(sympy.expand) == sympy.zeros(3, 3)


def test_schur_elimination_reproduces_companion_row():
    system = wronskian_system(3, 2, 1, substitutions={})
    cubed = system.schur_reduce(diagram([3]), WronskModuleElem.basis_vector(3, 1, diagram()))
    assert sympy.expand(cubed.coefficient(diagram()) - (zeta - u3) / 4) == 0
    assert sympy.expand(cubed.coefficient(diagram([1])) + u2 / 4) == 0
    assert cubed.coefficient(diagram([2])) == 0


def test_matrices_are_additive_compounds():
    pair = lax_pair(4, 3).subs(string_relations(4, 3))
    B1, Q1 = companion_matrices(pair)
    B, Qm = lax_matrices(4, 3, 2)
    assert (B - additive_compound(B1, 4, 2)).applyfunc(sympy.expand) == sympy.zeros(6, 6)
    assert (Qm - additive_compound(Q1, 4, 2)).applyfunc(sympy.expand) == sympy.zeros(6, 6)


def test_conjugation_matrix():
    assert conjugation_matrix(3, 1) == sympy.Matrix([[0, 0, 1], [0, -1, 0], [1, 0, 0]])


@pytest.mark.parametrize("p", range(2, 7))
def test_charge_conjugation_is_involution_up_to_sign(p):
    for n in range(1, p):
        for lam in young_basis(p, n):
            once = charge_conjugate(p, n, WronskModuleElem.basis_vector(p, n, lam))
            twice = charge_conjugate(p, p - n, once)
            assert list(twice.coefficients) == [lam]
            assert abs(twice.coefficient(lam)) == 1


@pytest.mark.parametrize(
    "p,pprime,n,which",
    [(3, 2, 1, "B"), (3, 2, 1, "Q"), (4, 3, 1, "B"), (4, 3, 2, "B"), (4, 3, 1, "Q")],
)
def test_conjugation_relation(p, pprime, n, which):
    res = conjugation_residual(p, pprime, n, which)
    assert res == sympy.zeros(res.rows, res.cols)


def test_conjugation_residual_rejects_unknown_matrix():
    with pytest.raises(ValidationError):
        conjugation_residual(3, 2, 1, "C")


def test_pure_gravity_characteristic_polynomial():
    F, _ = char_polys(3, 2, 1)
    vdot = g * R.D(v2)
    expected = Y**3 + sympy.Rational(3, 4) * v2 * Y - X / 4 + sympy.Rational(3, 8) * vdot
    assert sympy.expand(F.as_expr() - expected) == 0


def test_ising_semiclassical_curves():
    F, G = char_polys(4, 3, 2, ISING_BACKGROUND)
    r = sympy.Rational
    expected_f = Y**6 - r(2, 3) * Y**4 + r(1, 2) * Y**2 * X - r(7, 18) * Y**2
    expected_g = (
        Y**6
        - r(2, 27) * Y**4
        + 2 * Y**2 * X**3
        - r(16, 3) * Y**2 * X**2
        + r(85, 18) * Y**2 * X
        - r(2023, 1458) * Y**2
    )
    assert sympy.expand(F.as_expr() - expected_f) == 0
    assert sympy.expand(G.as_expr() - expected_g) == 0


def test_yang_lee_conjugate_polynomials():
    bg = chebyshev_background(5, 2)
    F2, G2 = char_polys(5, 2, 2, bg)
    F3, G3 = char_polys(5, 2, 3, bg)
    assert F2.degrees[1] == 10
    assert sympy.expand(F3.as_expr() - F2.as_expr().subs(Y, -Y)) == 0
    assert sympy.expand(G3.as_expr() - G2.as_expr().subs(Y, -Y)) == 0


def test_chebyshev_normal_form():
    _, G = char_polys(3, 2, 1, chebyshev_background(3, 2))
    form = chebyshev_normal_form(G)
    assert form == {(0, 3): sympy.Rational(1, 4), (2, 0): sympy.Rational(-1, 4)}


def test_quantum_dimensions():
    assert quantum_dimension(5, 2, 1, 1) == pytest.approx(1.0)
    assert quantum_dimension(4, 3, 1, 1) == pytest.approx(1.0)
    d = quantum_dimension(5, 2, 2, 1)
    assert abs(d) == pytest.approx(2 * math.cos(2 * math.pi / 5))
    with pytest.raises(ValidationError):
        quantum_dimension(5, 2, 1, 2)


def test_boundary_entropy_sums():
    assert bdry_entropy_check(4, 3, 1, 2) < 1e-12
    assert bdry_entropy_check(5, 2, 2, 1, tau=0.7) < 1e-12


def test_kac_branch():
    assert kac_branch_check(5, 2, 2) < 1e-10
    assert kac_branch_check(4, 3, 3) < 1e-10
    with pytest.raises(ValidationError):
        kac_branch_check(5, 2, 5)


def test_semiclassical_factorization():
    ising = semiclassical_factor(4, 3)
    assert ising.q_power == 2
    assert ising.scales == pytest.approx([-math.sqrt(2)])
    assert ising.zeta_signs == [-1]
    assert ising.residual < 1e-10

    assert semiclassical_factor(5, 2).residual < 1e-10
    assert semiclassical_factor(7, 2).residual < 1e-9

    with pytest.raises(ValidationError):
        semiclassical_factor(6, 3)


def test_spectral_duality_pure_gravity():
    check = spectral_duality_check(3, 2, 1)
    assert check.q_power == 0
    assert check.eta_scale == -1
    assert check.constant == sympy.Rational(1, 2)


def test_spectral_duality_ising():
    check = spectral_duality_check(4, 3, 2, chebyshev_background(4, 3))
    assert check.q_power == 2
    assert abs(check.eta_scale) == 1 / sympy.sqrt(2)


def test_spectral_duality_rejects():
    with pytest.raises(ValidationError):
        spectral_duality_check(3, 3, 1)
    with pytest.raises(UnsupportedCaseError):
        spectral_duality_check(5, 2, 1)
