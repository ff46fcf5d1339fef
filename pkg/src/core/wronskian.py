"""Generalized Wronskians of n solutions of P ψ = zeta ψ.

W_λ = det(∂^(λ_a + n - a) ψ_b) for λ in Λ_{p,n}; equivalently the minor of the
p x n derivative matrix on the decreasing row orders d_a = λ_a + n - a. Rows of
order >= p are eliminated with the companion reduction of the operator algebra,
so ∂ and ∂_zeta close on the C(p, n) Wronskians of Λ_{p,n}.
"""

import cmath
import itertools
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy
from numpy.polynomial import chebyshev as C
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy.combinatorics import Permutation

from src.core.dsl import (
    DEFAULT_RING,
    SUPPORTED_PAIRS,
    DifferentialRing,
    LaxPair,
    as_curve,
    companion_matrices,
    lax_pair,
    op_mul,
    partial_power,
    reduce_order,
    string_relations,
    transform,
)
from src.core.errors import UnsupportedCaseError, ValidationError, WronskianError
from src.core.models import TransformKind, YoungDiagram
from src.core.polynomials import BivariatePolynomial

logger = logging.getLogger(__name__)

DUALITY_PAIRS = ((3, 2), (4, 3))

# eta rescalings tried when matching a dual curve
_ETA_SCALES = [sympy.Integer(1), sympy.sqrt(2), 1 / sympy.sqrt(2), sympy.Integer(2), sympy.Rational(1, 2)]


def _check_n(p: int, n: int, low: int = 1):
    if not low <= n <= p:
        raise WronskianError(f"n={n} outside [{low}, {p}]")


def diagram(rows: Sequence[int] = ()) -> YoungDiagram:
    return YoungDiagram(rows=tuple(rows))


# Young diagram bookkeeping


def young_basis(p: int, n: int) -> List[YoungDiagram]:
    """Λ_{p,n}: at most n rows of length at most p - n, ordered by size.

    Within a size, diagrams are ordered by sum_a λ_a (p-n)^(a-1), then by rows.
    """
    _check_n(p, n)
    width = p - n
    diagrams = {
        diagram(sorted(rows, reverse=True))
        for rows in itertools.combinations_with_replacement(range(width + 1), n)
    }

    def key(lam: YoungDiagram):
        padded = lam.padded(n)
        weight = sum(r * width**a for a, r in enumerate(padded))
        return lam.size, weight, padded

    return sorted(diagrams, key=key)


def rows_of(lam: YoungDiagram, n: int) -> Tuple[int, ...]:
    """Derivative orders d_a = λ_a + n - a, strictly decreasing."""
    return tuple(r + n - 1 - a for a, r in enumerate(lam.padded(n)))


def sort_rows(rows: Sequence[int]) -> Tuple[int, Optional[YoungDiagram]]:
    """(sign, λ) with det over rows = sign * W_λ; (0, None) when two rows coincide."""
    if len(set(rows)) < len(rows):
        return 0, None
    order = sorted(range(len(rows)), key=lambda i: -rows[i])
    sign = Permutation(order).signature()
    n = len(rows)
    return sign, diagram(rows[i] - (n - 1 - a) for a, i in enumerate(order))


def pieri(lam: YoungDiagram, k: int, n: int) -> List[YoungDiagram]:
    """Diagrams with at most n rows obtained from λ by adding a horizontal k-strip."""
    if k < 0:
        return []
    base = lam.padded(n)
    out = []

    def grow(a: int, left: int, acc: List[int]):
        if a == n:
            if left == 0:
                out.append(diagram(acc))
            return
        cap = left if a == 0 else min(left, base[a - 1] - base[a])
        for extra in range(cap + 1):
            grow(a + 1, left - extra, acc + [base[a] + extra])

    grow(0, k, [])
    return out


def lr_expand(mu: YoungDiagram, lam: YoungDiagram, n: int) -> Dict[YoungDiagram, int]:
    """s_μ s_λ truncated to at most n rows.

    s_μ is expanded by Jacobi-Trudi into products of h_k, each applied by Pieri.
    """
    ell = len(mu.rows)
    out: Dict[YoungDiagram, int] = {}
    for perm in itertools.permutations(range(ell)):
        ks = [mu.rows[i] - i + perm[i] for i in range(ell)]
        if any(k < 0 for k in ks):
            continue
        sign = Permutation(list(perm)).signature() if ell > 1 else 1
        current: Dict[YoungDiagram, int] = {lam: 1}
        for k in ks:
            step: Dict[YoungDiagram, int] = {}
            for nu, c in current.items():
                for grown in pieri(nu, k, n):
                    step[grown] = step.get(grown, 0) + c
            current = step
        for nu, c in current.items():
            out[nu] = out.get(nu, 0) + sign * c
    return {nu: c for nu, c in out.items() if c}


def additive_compound(M: sympy.Matrix, p: int, n: int) -> sympy.Matrix:
    """Action of a p x p derivation ψ⃗' = M ψ⃗ on the n x n minors, in young_basis order."""
    basis = young_basis(p, n)
    index = {lam: i for i, lam in enumerate(basis)}
    out = sympy.zeros(len(basis), len(basis))
    for i, lam in enumerate(basis):
        rows = rows_of(lam, n)
        for a, d in enumerate(rows):
            for e in range(p):
                c = M[d, e]
                if c == 0:
                    continue
                sign, mu = sort_rows(rows[:a] + (e,) + rows[a + 1 :])
                if sign:
                    out[i, index[mu]] += sign * c
    return out.applyfunc(sympy.expand)


class WronskModuleElem(BaseModel):
    """Linear combination sum_λ c_λ W_λ over Λ_{p,n}."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    p: int
    n: int
    coefficients: Dict[YoungDiagram, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def in_basis(self):
        bad = [str(lam) for lam in self.coefficients if not lam.fits(self.p, self.n)]
        if bad:
            raise ValueError(f"{bad} not in Λ_({self.p},{self.n})")
        cleaned = {}
        for lam, c in self.coefficients.items():
            c = sympy.expand(c)
            if c != 0:
                cleaned[lam] = c
        self.coefficients = cleaned
        return self

    @classmethod
    def basis_vector(cls, p: int, n: int, lam: YoungDiagram) -> "WronskModuleElem":
        return cls(p=p, n=n, coefficients={lam: 1})

    def coefficient(self, lam: YoungDiagram):
        return self.coefficients.get(lam, sympy.Integer(0))

    def __str__(self) -> str:
        if not self.coefficients:
            return "0"
        return " + ".join(f"({c})*W{lam}" for lam, c in self.coefficients.items())


# Wronskian systems


class WronskianSystem:
    """Closed ∂ and ∂_zeta action on the Wronskians of Λ_{p,n} for a fixed pair."""

    def __init__(self, pair: LaxPair, n: int):
        self.pair = pair
        self.p = pair.P.order
        _check_n(self.p, n)
        self.n = n
        self.basis = young_basis(self.p, n)
        self.index = {lam: i for i, lam in enumerate(self.basis)}
        self._cache: Dict[int, Dict[int, Any]] = {}

    @property
    def ring(self) -> DifferentialRing:
        return self.pair.ring

    def row_reduce(self, d: int) -> Dict[int, Any]:
        return reduce_order(self.pair.P, d, self._cache)

    def reduce_rows(self, rows: Sequence[int]) -> Dict[YoungDiagram, Any]:
        """Minor on arbitrary row orders as a combination of basis Wronskians."""
        options = [
            [(d, sympy.Integer(1))] if d < self.p else list(self.row_reduce(d).items()) for d in rows
        ]
        out: Dict[YoungDiagram, Any] = {}
        for combo in itertools.product(*options):
            sign, lam = sort_rows(tuple(e for e, _ in combo))
            if not sign:
                continue
            out[lam] = out.get(lam, 0) + sign * sympy.Mul(*(c for _, c in combo))
        return {lam: sympy.expand(c) for lam, c in out.items() if sympy.expand(c) != 0}

    def _accumulate(self, out: Dict[YoungDiagram, Any], rows, scale):
        for lam, c in self.reduce_rows(rows).items():
            out[lam] = out.get(lam, 0) + scale * c

    def schur_reduce(self, mu: YoungDiagram, target: WronskModuleElem) -> WronskModuleElem:
        """S_μ applied to target, reduced back onto Λ_{p,n}."""
        if (target.p, target.n) != (self.p, self.n):
            raise WronskianError(f"element lives on Λ_({target.p},{target.n}), system on Λ_({self.p},{self.n})")
        out: Dict[YoungDiagram, Any] = {}
        for lam, c in target.coefficients.items():
            for nu, m in lr_expand(mu, lam, self.n).items():
                self._accumulate(out, rows_of(nu, self.n), c * m)
        return WronskModuleElem(p=self.p, n=self.n, coefficients=out)

    def zeta_derivative(self, lam: YoungDiagram) -> WronskModuleElem:
        """∂_zeta W_λ: each row ∂^d ψ is replaced by ∂^d Q ψ and reduced."""
        rows = rows_of(lam, self.n)
        out: Dict[YoungDiagram, Any] = {}
        for a, d in enumerate(rows):
            shifted = op_mul(partial_power(d, self.ring), self.pair.Q)
            for k, c in shifted.terms.items():
                self._accumulate(out, rows[:a] + (k,) + rows[a + 1 :], c)
        return WronskModuleElem(p=self.p, n=self.n, coefficients=out)

    def lax_matrices(self) -> Tuple[sympy.Matrix, sympy.Matrix]:
        """(B, Q) with ∂ W_λ = sum_μ B[λ, μ] W_μ and likewise for ∂_zeta."""
        size = len(self.basis)
        B = sympy.zeros(size, size)
        Qm = sympy.zeros(size, size)
        box = diagram([1])
        for i, lam in enumerate(self.basis):
            unit = WronskModuleElem.basis_vector(self.p, self.n, lam)
            for mu, c in self.schur_reduce(box, unit).coefficients.items():
                B[i, self.index[mu]] = c
            for mu, c in self.zeta_derivative(lam).coefficients.items():
                Qm[i, self.index[mu]] = c
        logger.debug(f"Wronskian matrices for p={self.p}, n={self.n}: {size}x{size}")
        return B, Qm


def _pair(p: int, pprime: int, substitutions: Optional[Mapping], ring: DifferentialRing) -> LaxPair:
    if (p, pprime) not in SUPPORTED_PAIRS:
        raise UnsupportedCaseError(f"(p, p')=({p}, {pprime}) not in {SUPPORTED_PAIRS}")
    subs = string_relations(p, pprime, ring) if substitutions is None else substitutions
    return lax_pair(p, pprime, ring=ring).subs(subs)


def wronskian_system(
    p: int,
    pprime: int,
    n: int,
    substitutions: Optional[Mapping] = None,
    ring: DifferentialRing = DEFAULT_RING,
) -> WronskianSystem:
    """Substitutions default to the string relations; pass {} for raw coefficients."""
    _check_n(p, n)
    return WronskianSystem(_pair(p, pprime, substitutions, ring), n)


def schur_reduce(
    p: int,
    pprime: int,
    n: int,
    mu: YoungDiagram,
    target: WronskModuleElem,
    substitutions: Optional[Mapping] = None,
) -> WronskModuleElem:
    return wronskian_system(p, pprime, n, substitutions).schur_reduce(mu, target)


def lax_matrices(
    p: int, pprime: int, n: int, substitutions: Optional[Mapping] = None
) -> Tuple[sympy.Matrix, sympy.Matrix]:
    return wronskian_system(p, pprime, n, substitutions).lax_matrices()


# Charge conjugation


def charge_conjugate_diagram(p: int, n: int, lam: YoungDiagram) -> Tuple[int, YoungDiagram]:
    """λ -> (-1)^|λ| (λ^⊥)^T, mapping Λ_{p,n} onto Λ_{p,p-n}."""
    if not lam.fits(p, n):
        raise WronskianError(f"{lam} not in Λ_({p},{n})")
    padded = lam.padded(n)
    complement = diagram((p - n) - padded[n - 1 - a] for a in range(n))
    return (-1) ** lam.size, complement.transpose()


def charge_conjugate(p: int, n: int, elem: WronskModuleElem) -> WronskModuleElem:
    _check_n(p - 1, n)
    if (elem.p, elem.n) != (p, n):
        raise WronskianError(f"element lives on Λ_({elem.p},{elem.n})")
    out: Dict[YoungDiagram, Any] = {}
    for lam, c in elem.coefficients.items():
        sign, image = charge_conjugate_diagram(p, n, lam)
        out[image] = out.get(image, 0) + sign * c
    return WronskModuleElem(p=p, n=p - n, coefficients=out)


def conjugation_matrix(p: int, n: int) -> sympy.Matrix:
    """C[a, b] = ±1 when the a-th diagram of Λ_{p,n} maps to the b-th of Λ_{p,p-n}."""
    _check_n(p - 1, n)
    source, target = young_basis(p, n), young_basis(p, p - n)
    index = {lam: i for i, lam in enumerate(target)}
    out = sympy.zeros(len(source), len(target))
    for a, lam in enumerate(source):
        sign, image = charge_conjugate_diagram(p, n, lam)
        out[a, index[image]] = sign
    return out


def conjugation_residual(
    p: int,
    pprime: int,
    n: int,
    which: str = "B",
    substitutions: Optional[Mapping] = None,
) -> sympy.Matrix:
    """M^(p-n) + C^-1 (M^(n))^T C - tr(M^(1)) I, zero for both B and Q."""
    if which not in ("B", "Q"):
        raise ValidationError(f"which must be 'B' or 'Q', got {which!r}")
    _check_n(p - 1, n)
    pair = _pair(p, pprime, substitutions, DEFAULT_RING)
    pick = 0 if which == "B" else 1
    M = WronskianSystem(pair, n).lax_matrices()[pick]
    N = WronskianSystem(pair, p - n).lax_matrices()[pick]
    trace = companion_matrices(pair)[pick].trace()
    Cm = conjugation_matrix(p, n)
    res = N + Cm.T * M.T * Cm - trace * sympy.eye(N.rows)
    return res.applyfunc(sympy.expand)


# Spectral curves


def _char_polys(system: WronskianSystem, label: str) -> Tuple[BivariatePolynomial, BivariatePolynomial]:
    ring = system.ring
    z = sympy.Symbol("z")
    B, Qm = system.lax_matrices()
    F = (z * sympy.eye(B.rows) - B).det(method="berkowitz")
    G = (ring.Q * sympy.eye(Qm.rows) - Qm).det(method="berkowitz")
    return (
        as_curve(F, ring, label=f"F{label}", var=z),
        as_curve(G, ring, label=f"G{label}"),
    )


def char_polys(
    p: int, pprime: int, n: int, substitutions: Optional[Mapping] = None
) -> Tuple[BivariatePolynomial, BivariatePolynomial]:
    """F = det(z - B^(n)) in (zeta, z) and G = det(Q - Q^(n)) in (zeta, Q)."""
    system = wronskian_system(p, pprime, n, substitutions)
    return _char_polys(system, f"^({n})({p},{pprime})")


def chebyshev_normal_form(curve: BivariatePolynomial) -> Dict[Tuple[int, int], Any]:
    """Coefficients of the curve in the T_i(x) T_j(y) basis."""
    x, y = sympy.symbols("x y")
    out: Dict[Tuple[int, int], Any] = {}
    expr = sympy.expand(curve.as_expr())
    dx, dy = curve.degrees
    for i in range(dx, -1, -1):
        for j in range(dy, -1, -1):
            c = sympy.Poly(expr, x, y).coeff_monomial(x**i * y**j)
            if c == 0:
                continue
            lead = sympy.Integer(2) ** (max(i - 1, 0) + max(j - 1, 0))
            coef = sympy.nsimplify(c / lead) if curve.is_numeric else c / lead
            out[(i, j)] = sympy.simplify(coef)
            expr = sympy.expand(expr - coef * sympy.chebyshevt(i, x) * sympy.chebyshevt(j, y))
    return {k: v for k, v in out.items() if v != 0}


class SemiclassicalFactorization(BaseModel):
    """Q^q_power * prod_a (T_p(Q / scale_a) - T_p'(sign_a zeta)), checked against the pair-sum curve."""

    p: int
    pprime: int
    q_power: int
    scales: List[float]
    zeta_signs: List[int]
    residual: float

    def evaluate(self, zeta: complex, Q: complex) -> complex:
        tp = [0] * self.p + [1]
        tq = [0] * self.pprime + [1]
        value = Q**self.q_power
        for scale, sign in zip(self.scales, self.zeta_signs):
            value *= C.chebval(Q / scale, tp) - C.chebval(sign * zeta, tq)
        return complex(value)

    @property
    def leading(self) -> float:
        return float(np.prod([2.0 ** (self.p - 1) / s**self.p for s in self.scales]))

    def as_expr(self):
        x, y = sympy.symbols("x y")
        expr = y**self.q_power
        for a, sign in enumerate(self.zeta_signs, start=1):
            scale = 2 * sympy.cos(sympy.pi * self.pprime * a / self.p)
            expr *= sympy.chebyshevt(self.p, y / scale) - sympy.chebyshevt(self.pprime, sign * x)
        return expr


def _pair_sum_roots(p: int, pprime: int, tau: float) -> np.ndarray:
    labels = np.arange(p)
    single = np.cosh(pprime * (tau - 2j * np.pi * labels / p))
    return np.array([single[a] + single[b] for a, b in itertools.combinations(range(p), 2)])


def semiclassical_factor(p: int, pprime: int, taus: Optional[Sequence[float]] = None) -> SemiclassicalFactorization:
    """Chebyshev factorization of the semiclassical n=2 curve.

    Compared with prod_{j1<j2} (Q - Q^(j1) - Q^(j2)) on the uniformization
    zeta = cosh(p τ), Q^(j) = cosh(p'(τ - 2πi(j-1)/p)).
    """
    if p < 3 or pprime < 1:
        raise ValidationError(f"need p >= 3 and p' >= 1, got ({p}, {pprime})")
    if math.gcd(p, pprime) != 1:
        raise ValidationError(f"({p}, {pprime}) are not coprime")
    count = (p - 1) // 2 if p % 2 else (p - 2) // 2
    factor = SemiclassicalFactorization(
        p=p,
        pprime=pprime,
        q_power=0 if p % 2 else p // 2,
        scales=[2 * math.cos(math.pi * pprime * a / p) for a in range(1, count + 1)],
        zeta_signs=[(-1) ** a for a in range(1, count + 1)],
        residual=0.0,
    )
    taus = [0.1 + 0.05 * k for k in range(8)] if taus is None else list(taus)
    worst = 0.0
    for tau in taus:
        roots = _pair_sum_roots(p, pprime, tau)
        zeta = math.cosh(p * tau)
        radius = 1.0 + 1.5 * float(np.max(np.abs(roots)))
        for k in range(5):
            Q = radius * cmath.exp(2j * math.pi * (k + 0.3) / 5)
            direct = complex(np.prod(Q - roots))
            formula = factor.evaluate(zeta, Q) / factor.leading
            worst = max(worst, abs(direct - formula) / abs(direct))
    logger.info(f"Chebyshev factorization ({p},{pprime}): residual {worst:.2e}")
    return factor.model_copy(update={"residual": worst})


# Kac table data


def quantum_dimension(p: int, pprime: int, r: int, s: int) -> float:
    """S_(r,s)(1,1) / S_(1,1)(1,1) for the (p, p') minimal model modular S-matrix."""
    if not (1 <= r <= p - 1 and 1 <= s <= pprime - 1):
        raise ValidationError(f"Kac label ({r},{s}) outside [1,{p - 1}] x [1,{pprime - 1}]")

    def S(r1, s1, m, n):
        return (
            2
            * math.sqrt(2 / (p * pprime))
            * (-1) ** (s1 * m + r1 * n + 1)
            * math.sin(math.pi * r1 * m * pprime / p)
            * math.sin(math.pi * s1 * n * p / pprime)
        )

    return S(r, s, 1, 1) / S(1, 1, 1, 1)


def bdry_entropy_check(p: int, pprime: int, r: int, s: int, tau: float = 0.3) -> float:
    """Largest deviation of the shifted-sheet sums from their sine ratios.

    sum_{m=-(s-1),step 2}^{s-1} cosh(p(τ + iπm/p')) / cosh(pτ) = sin(πsp/p') / sin(πp/p'),
    and the same with (p, s) and (p', r) exchanged.
    """
    quantum_dimension(p, pprime, r, s)

    def shifted(a: int, b: int, k: int) -> float:
        zeta = cmath.cosh(a * tau)
        total = sum(cmath.cosh(a * (tau + 1j * math.pi * m / b)) for m in range(-(k - 1), k, 2))
        expected = math.sin(math.pi * k * a / b) / math.sin(math.pi * a / b)
        return abs(total / zeta - expected)

    return max(shifted(p, pprime, s), shifted(pprime, p, r))


def kac_branch_check(p: int, pprime: int, n: int, taus: Optional[Sequence[float]] = None) -> float:
    """Relative deviation of the symmetric branch sum from its quantum-dimension multiple of Q^(0).

    The branch j_k = k - (n+1)/2 sums to sin(nπp'/p) / sin(πp'/p) * Q^(0), which
    is (-1)^(n+1) d_(n,1).
    """
    if pprime < 2:
        raise ValidationError("Kac table needs p' >= 2")
    if not 1 <= n <= p - 1:
        raise ValidationError(f"n={n} outside [1, {p - 1}]")
    kappa = (-1) ** (n + 1) * quantum_dimension(p, pprime, n, 1)
    taus = np.linspace(0.05, 1.0, 20) if taus is None else np.asarray(taus, dtype=float)

    def branch(label: float, tau: float) -> complex:
        return cmath.cosh(pprime * (tau - 2j * math.pi * (label - 1) / p))

    worst = 0.0
    for tau in taus:
        total = sum(branch(k - (n + 1) / 2, tau) for k in range(1, n + 1))
        q0 = branch(0, tau)
        worst = max(worst, abs(total - kappa * q0) / max(1.0, abs(q0)))
    return worst


# Spectral duality


class DualityCheck(BaseModel):
    """G^(p-n)(zeta, Q) = constant * Q^q_power * G~^(n)(eta_scale Q, p_sign zeta)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    p: int
    pprime: int
    n: int
    eta_scale: Any
    p_sign: int
    constant: Any
    q_power: int
    residual: float = 0.0


def spectral_duality_check(
    p: int, pprime: int, n: int, substitutions: Optional[Mapping] = None
) -> DualityCheck:
    """Match the dual pair's n-Wronskian curve with the original (p-n)-Wronskian curve."""
    if math.gcd(p, pprime) != 1:
        raise ValidationError(f"({p}, {pprime}) are not coprime")
    if (p, pprime) not in DUALITY_PAIRS:
        raise UnsupportedCaseError(f"duality check only for {DUALITY_PAIRS}")
    if not 1 <= n <= pprime - 1:
        raise ValidationError(f"dual n={n} outside [1, {pprime - 1}]")
    ring = DEFAULT_RING
    pair = _pair(p, pprime, substitutions, ring)
    dual = transform(TransformKind.DUALITY, pair)

    Qv, zeta = ring.Q, ring.zeta
    _, Qm = WronskianSystem(pair, p - n).lax_matrices()
    G = sympy.expand((Qv * sympy.eye(Qm.rows) - Qm).det(method="berkowitz"))
    _, Qd = WronskianSystem(dual, n).lax_matrices()
    Gd = sympy.expand((Qv * sympy.eye(Qd.rows) - Qd).det(method="berkowitz"))

    degree = sympy.degree(G, Qv)
    for scale in _ETA_SCALES:
        for eta_scale in (scale, -scale):
            for p_sign in (1, -1):
                H = sympy.expand(Gd.subs({zeta: eta_scale * Qv, Qv: p_sign * zeta}, simultaneous=True))
                if H == 0:
                    continue
                q_power = degree - sympy.degree(H, Qv)
                if q_power < 0:
                    continue
                ratio = sympy.simplify(sympy.cancel(G / (Qv**q_power * H)))
                if ratio != 0 and not ratio.has(Qv, zeta, ring.t):
                    logger.info(f"duality ({p},{pprime}) n={n}: eta={eta_scale}Q, P={p_sign}zeta, c={ratio}")
                    return DualityCheck(
                        p=p,
                        pprime=pprime,
                        n=n,
                        eta_scale=eta_scale,
                        p_sign=p_sign,
                        constant=ratio,
                        q_power=q_power,
                    )
    raise WronskianError(f"dual curve of ({p},{pprime}) n={n} is not proportional to G^({p - n})")


def matrix_to_text(M: sympy.Matrix) -> str:
    return "\n".join("[" + ", ".join(str(M[i, j]) for j in range(M.cols)) + "]" for i in range(M.rows))
