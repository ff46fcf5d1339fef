"""Double-scaling operator algebra.

Operators are sums c_k(t) ∂^k with coefficients to the left, where
∂ = g_s d/dt. Coefficients live in the ring generated by u_m(t), v_m(t) and
their t-derivatives over Q[t, zeta, g_s]; commuting ∂ past a coefficient emits
one power of g_s per derivative, so the g_s-grading of every result is exact.
"""

import logging
from math import comb, gcd
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import DslError, NumericalError, UnsupportedCaseError, ValidationError
from src.core.models import TransformKind
from src.core.polynomials import X, Y, BivariatePolynomial
from src.core.specfun import airy_eval

logger = logging.getLogger(__name__)

SUPPORTED_PAIRS = ((2, 1), (3, 2), (4, 3), (5, 2))
MAX_GENERATOR = 8

# 6th-order central stencil for f''
_STENCIL = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0


class DifferentialRing:
    """Symbols and derivation of the coefficient ring."""

    def __init__(self, t: str = "t", zeta: str = "zeta", gs: str = "g_s", q: str = "Q"):
        self.t, self.zeta, self.gs, self.Q = sympy.symbols(f"{t} {zeta} {gs} {q}")

    def u(self, m: int):
        return sympy.Function(f"u{m}")(self.t)

    def v(self, m: int):
        return sympy.Function(f"v{m}")(self.t)

    def D(self, f, k: int = 1):
        """k-th plain t-derivative."""
        return sympy.diff(f, self.t, k) if k else f

    def partial(self, f, k: int = 1):
        """∂^k applied to a coefficient: g_s^k d^k f/dt^k."""
        return self.gs**k * self.D(f, k) if k else f

    def namespace(self) -> Dict[str, Any]:
        names: Dict[str, Any] = {"t": self.t, "zeta": self.zeta, "g_s": self.gs, "Q": self.Q}
        for m in range(2, MAX_GENERATOR + 1):
            names[f"u{m}"] = self.u(m)
            names[f"v{m}"] = self.v(m)
        return names

    def generator(self, name: str):
        names = self.namespace()
        if name not in names or name in ("t", "zeta", "g_s", "Q"):
            raise ValidationError(f"unknown ring generator {name!r}")
        return names[name]

    def substitution(self, mapping: Optional[Mapping]) -> Dict[Any, Any]:
        """Normalize a substitution; string keys name generators, string values are parsed."""
        out: Dict[Any, Any] = {}
        for key, value in dict(mapping or {}).items():
            target = self.generator(key) if isinstance(key, str) else key
            if isinstance(value, str):
                try:
                    value = sympy.sympify(value, locals=self.namespace())
                except (sympy.SympifyError, SyntaxError, TypeError) as e:
                    raise ValidationError(f"cannot parse substitution {key}={value!r}: {e}")
            out[target] = sympy.sympify(value)
        return out

    def apply(self, expr, mapping: Mapping):
        if not mapping:
            return expr
        return sympy.expand(sympy.sympify(expr).subs(dict(mapping)).doit())


DEFAULT_RING = DifferentialRing()


class DifferentialOperator(BaseModel):
    """sum_k c_k ∂^k in normal form."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    terms: Dict[int, Any] = Field(default_factory=dict)
    ring: DifferentialRing = Field(default_factory=lambda: DEFAULT_RING)

    @field_validator("terms", mode="before")
    @classmethod
    def normal_form(cls, v):
        out = {}
        for k, c in dict(v).items():
            if int(k) < 0:
                raise ValueError(f"negative order {k}")
            c = sympy.expand(sympy.sympify(c))
            if c != 0:
                out[int(k)] = c
        return out

    @property
    def order(self) -> int:
        return max(self.terms) if self.terms else 0

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, k: int):
        return self.terms.get(k, sympy.Integer(0))

    def _new(self, terms) -> "DifferentialOperator":
        return DifferentialOperator(terms=terms, ring=self.ring)

    def __add__(self, other: "DifferentialOperator") -> "DifferentialOperator":
        if not isinstance(other, DifferentialOperator):
            other = multiplication(other, self.ring)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return self._new(out)

    def __neg__(self) -> "DifferentialOperator":
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "DifferentialOperator":
        if not isinstance(other, DifferentialOperator):
            other = multiplication(other, self.ring)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, DifferentialOperator):
            return op_mul(self, other)
        return self._new({k: c * other for k, c in self.terms.items()})

    def __rmul__(self, other):
        return self._new({k: other * c for k, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, DifferentialOperator):
            return NotImplemented
        return (self - other).is_zero

    def subs(self, mapping: Mapping) -> "DifferentialOperator":
        mapping = self.ring.substitution(mapping)
        return self._new({k: self.ring.apply(c, mapping) for k, c in self.terms.items()})

    def transpose(self) -> "DifferentialOperator":
        """(f ∂^n)^T = (-∂)^n f, re-ordered."""
        total = self._new({})
        for k, c in self.terms.items():
            total = total + (-1) ** k * op_mul(partial_power(k, self.ring), multiplication(c, self.ring))
        return total

    def __str__(self) -> str:
        return op_to_text(self)


def partial_power(k: int, ring: DifferentialRing = DEFAULT_RING) -> DifferentialOperator:
    return DifferentialOperator(terms={k: 1}, ring=ring)


def multiplication(f, ring: DifferentialRing = DEFAULT_RING) -> DifferentialOperator:
    return DifferentialOperator(terms={0: f}, ring=ring)


def op_mul(A: DifferentialOperator, B: DifferentialOperator) -> DifferentialOperator:
    """Normal-ordered product: ∂^a g = sum_j C(a, j) (∂^j g) ∂^(a-j)."""
    if A.ring is not B.ring:
        raise DslError("operators live in different rings")
    ring = A.ring
    out: Dict[int, Any] = {}
    for a, f in A.terms.items():
        for b, g in B.terms.items():
            for j in range(a + 1):
                dg = ring.partial(g, j)
                if dg == 0:
                    break
                k = a - j + b
                out[k] = out.get(k, 0) + comb(a, j) * f * dg
    return DifferentialOperator(terms=out, ring=ring)


def op_commutator(A: DifferentialOperator, B: DifferentialOperator) -> DifferentialOperator:
    return op_mul(A, B) - op_mul(B, A)


def op_to_text(A: DifferentialOperator) -> str:
    """Canonical one-line form, orders descending, coefficients in sympy's sorted printing."""
    if A.is_zero:
        return "0"
    return " + ".join(f"({sympy.sstr(A.terms[k], order='lex')})*D^{k}" for k in sorted(A.terms, reverse=True))


def curve_to_text(curve: BivariatePolynomial) -> str:
    """One monomial per line: 'i j coefficient', sorted by (i, j)."""
    return "\n".join(
        f"{i} {j} {sympy.sstr(c, order='lex')}" for (i, j), c in sorted(curve.coefficients.items())
    )


# Operator pairs


class LaxPair(BaseModel):
    """(P, Q) with P of order p and Q of order p'."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    P: DifferentialOperator
    Q: DifferentialOperator
    p: int
    pprime: int
    beta: Any = sympy.Integer(1)

    @property
    def ring(self) -> DifferentialRing:
        return self.P.ring

    def subs(self, mapping: Mapping) -> "LaxPair":
        return self.model_copy(update={"P": self.P.subs(mapping), "Q": self.Q.subs(mapping)})


class StringResidual(BaseModel):
    """[P, Q] - g_s together with its independent coefficient equations."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    residual: DifferentialOperator
    constraints: List[Any] = Field(default_factory=list)

    @property
    def vanishes(self) -> bool:
        return self.residual.is_zero


def _check_pair(p: int, pprime: int, supported_only: bool = True):
    if supported_only and (p, pprime) not in SUPPORTED_PAIRS:
        raise UnsupportedCaseError(f"(p, p')=({p}, {pprime}) not in {SUPPORTED_PAIRS}")
    if not p > pprime >= 1:
        raise ValidationError(f"need p > p' >= 1, got ({p}, {pprime})")


def lax_pair(p: int, pprime: int, beta=1, ring: DifferentialRing = DEFAULT_RING) -> LaxPair:
    """P = 2^(p-1) ∂^p + sum_{n>=2} u_n ∂^(p-n),  Q = beta (2^(p'-1) ∂^p' + sum v_n ∂^(p'-n))."""
    _check_pair(p, pprime, supported_only=False)
    P = {p: 2 ** (p - 1)}
    for n in range(2, p + 1):
        P[p - n] = ring.u(n)
    Q = {pprime: 2 ** (pprime - 1)}
    for n in range(2, pprime + 1):
        Q[pprime - n] = ring.v(n)
    beta = sympy.sympify(beta)
    return LaxPair(
        P=DifferentialOperator(terms=P, ring=ring),
        Q=beta * DifferentialOperator(terms=Q, ring=ring),
        p=p,
        pprime=pprime,
        beta=beta,
    )


def string_relations(p: int, pprime: int, ring: DifferentialRing = DEFAULT_RING) -> Dict[Any, Any]:
    """Coefficient relations that kill the top orders of [P, Q] - g_s."""
    _check_pair(p, pprime)
    gs, t = ring.gs, ring.t
    v2, v3 = ring.v(2), ring.v(3)
    table = {
        (2, 1): {ring.u(2): -t},
        (3, 2): {ring.u(2): 3 * v2, ring.u(3): sympy.Rational(3, 2) * gs * ring.D(v2)},
        (4, 3): {
            ring.u(2): sympy.Rational(8, 3) * v2,
            ring.u(3): sympy.Rational(4, 3) * gs * ring.D(v2) + sympy.Rational(8, 3) * v3,
        },
        (5, 2): {ring.u(2): 20 * v2, ring.u(3): 30 * gs * ring.D(v2)},
    }
    return table[(p, pprime)]


def pair_residual(pair: LaxPair) -> DifferentialOperator:
    return op_commutator(pair.P, pair.Q) - pair.ring.gs


def string_residual(
    p: int,
    pprime: int,
    substitutions: Optional[Mapping] = None,
    beta=1,
    ring: DifferentialRing = DEFAULT_RING,
) -> StringResidual:
    """[P, Q] - g_s after substituting into the coefficients of P and Q."""
    _check_pair(p, pprime)
    pair = lax_pair(p, pprime, beta=beta, ring=ring).subs(substitutions or {})
    residual = pair_residual(pair)
    constraints = [residual.terms[k] for k in sorted(residual.terms, reverse=True)]
    logger.debug(f"string residual ({p},{pprime}): {len(constraints)} constraint(s)")
    return StringResidual(residual=residual, constraints=constraints)


def painleve_constraint(ring: DifferentialRing = DEFAULT_RING):
    """Order-zero remainder of the (3,2) string equation: g^3 v''' + 3 g v v' - g."""
    result = string_residual(3, 2, string_relations(3, 2, ring), ring=ring)
    if set(result.residual.terms) - {0}:
        raise DslError("(3,2) relations leave higher-order terms")
    return result.residual.coefficient(0)


def transform(
    kind: TransformKind,
    pair: LaxPair,
    a=1,
    b=0,
    c=0,
    d=1,
) -> LaxPair:
    """Linear canonical map, charge conjugation or duality of an operator pair."""
    kind = TransformKind(kind)
    if kind == TransformKind.LINEAR_CANONICAL:
        a, b, c, d = (sympy.sympify(x) for x in (a, b, c, d))
        if sympy.simplify(a * d - b * c - 1) != 0:
            raise ValidationError(f"ad - bc = {a * d - b * c}, expected 1")
        P = a * pair.P - c * pair.Q
        Q = d * pair.Q - b * pair.P
        return pair.model_copy(update={"P": P, "Q": Q, "p": P.order, "pprime": Q.order})
    if kind == TransformKind.CHARGE_CONJUGATION:
        return pair.model_copy(update={"P": pair.P.transpose(), "Q": -pair.Q.transpose()})
    sign = (-1) ** pair.pprime
    return LaxPair(
        P=(sign / pair.beta) * pair.Q.transpose(),
        Q=(sign * pair.beta) * pair.P.transpose(),
        p=pair.pprime,
        pprime=pair.p,
        beta=pair.beta,
    )


# Companion system for (ψ, ∂ψ, ..., ∂^(p-1)ψ)


def hook_coefficient(P: DifferentialOperator, m: int, ell: int):
    """U_m^(ell) = sum_k C(ell, k) ∂^k u_(m-k), u_j being the ∂^(p-j) coefficient of P."""
    p, ring = P.order, P.ring
    total = sympy.Integer(0)
    for k in range(0, min(m - 1, ell) + 1):
        j = m - k
        if 1 <= j <= p:
            total += comb(ell, k) * ring.partial(P.coefficient(p - j), k)
    return sympy.expand(total)


def reduce_order(P: DifferentialOperator, d: int, cache: Optional[Dict[int, Dict[int, Any]]] = None) -> Dict[int, Any]:
    """∂^d ψ in the basis ∂^e ψ, e < p, using P ψ = zeta ψ.

    Lifts 2^(p-1) ∂^(p+l) ψ = zeta ∂^l ψ - sum_m U_m^(l) ∂^(p+l-m) ψ and recurses
    on any order still >= p.
    """
    p, ring = P.order, P.ring
    if d < p:
        return {d: sympy.Integer(1)}
    cache = {} if cache is None else cache
    if d in cache:
        return cache[d]
    lead = P.coefficient(p)
    if ring.D(lead) != 0 or lead == 0:
        raise DslError(f"leading coefficient {lead} must be a nonzero constant")
    ell = d - p
    combo: Dict[int, Any] = {ell: ring.zeta}
    for m in range(1, p + ell + 1):
        U = hook_coefficient(P, m, ell)
        if U != 0:
            combo[p + ell - m] = combo.get(p + ell - m, 0) - U
    out: Dict[int, Any] = {}
    for e, c in combo.items():
        for f, cc in reduce_order(P, e, cache).items():
            out[f] = out.get(f, 0) + c * cc / lead
    out = {k: sympy.expand(v) for k, v in out.items()}
    cache[d] = {k: v for k, v in out.items() if v != 0}
    return cache[d]


def reduce_operator(P: DifferentialOperator, A: DifferentialOperator, cache=None) -> Dict[int, Any]:
    cache = {} if cache is None else cache
    out: Dict[int, Any] = {}
    for k, c in A.terms.items():
        for e, cc in reduce_order(P, k, cache).items():
            out[e] = out.get(e, 0) + c * cc
    return {e: sympy.expand(v) for e, v in out.items() if sympy.expand(v) != 0}


def companion_matrices(pair: LaxPair) -> Tuple[sympy.Matrix, sympy.Matrix]:
    """(B, Q) with ∂ ψ⃗ = B ψ⃗ and ∂_zeta ψ⃗ = Q ψ⃗ for ψ⃗ = (ψ, ..., ∂^(p-1) ψ)."""
    P, ring = pair.P, pair.ring
    p = P.order
    cache: Dict[int, Dict[int, Any]] = {}
    B = sympy.zeros(p, p)
    Qm = sympy.zeros(p, p)
    for row in range(p):
        for e, c in reduce_order(P, row + 1, cache).items():
            B[row, e] = c
        for e, c in reduce_operator(P, op_mul(partial_power(row, ring), pair.Q), cache).items():
            Qm[row, e] = c
    return B, Qm


def zero_curvature(pair: LaxPair) -> sympy.Matrix:
    """∂_t Q - ∂_zeta B + [Q, B]; zero exactly when the string equation holds."""
    ring = pair.ring
    B, Qm = companion_matrices(pair)
    res = ring.gs * Qm.diff(ring.t) - ring.gs * B.diff(ring.zeta) + Qm * B - B * Qm
    return res.applyfunc(lambda e: sympy.expand(e.doit()))


def as_curve(expr, ring: DifferentialRing, label: str = "", var=None) -> BivariatePolynomial:
    """Polynomial in (zeta, var) as a curve in (x, y); var defaults to the ring's Q."""
    var = ring.Q if var is None else var
    expr = sympy.expand(expr).subs({ring.zeta: X, var: Y}, simultaneous=True)
    return BivariatePolynomial.from_expr(expr, label=label)


def spectral_curve_of(pair: LaxPair, label: str = "") -> BivariatePolynomial:
    """det(Q I - Q(t; zeta)) as a polynomial in (x, y) = (zeta, Q)."""
    ring = pair.ring
    _, Qm = companion_matrices(pair)
    G = (ring.Q * sympy.eye(Qm.rows) - Qm).det(method="berkowitz")
    return as_curve(G, ring, label or f"G({pair.p},{pair.pprime})")


def companion_curve(
    p: int,
    pprime: int,
    substitutions: Optional[Mapping] = None,
    numeric: bool = False,
    ring: DifferentialRing = DEFAULT_RING,
) -> BivariatePolynomial:
    """Spectral curve of the companion system; string relations are applied by default."""
    _check_pair(p, pprime)
    subs = string_relations(p, pprime, ring) if substitutions is None else substitutions
    curve = spectral_curve_of(lax_pair(p, pprime, ring=ring).subs(subs))
    if numeric and not curve.is_numeric:
        raise DslError(f"curve still depends on {sorted(map(str, curve.free_symbols))}")
    return curve


def chebyshev_background(p: int, pprime: int, ring: DifferentialRing = DEFAULT_RING) -> Dict[Any, Any]:
    """Constant u_n, v_n making P(k) = T_p(k) and Q(k) = T_p'(k)."""
    k = sympy.Symbol("k")
    tp = sympy.Poly(sympy.chebyshevt(p, k), k)
    tq = sympy.Poly(sympy.chebyshevt(pprime, k), k)
    out: Dict[Any, Any] = {}
    for n in range(2, p + 1):
        out[ring.u(n)] = tp.coeff_monomial(k ** (p - n))
    for n in range(2, pprime + 1):
        out[ring.v(n)] = tq.coeff_monomial(k ** (pprime - n))
    return out


def semiclassical_curve(
    p: int, pprime: int, verify: bool = True, ring: DifferentialRing = DEFAULT_RING
) -> BivariatePolynomial:
    """(T_p(Q) - T_p'(zeta)) / 2^(p-1), optionally checked against the companion system."""
    _check_pair(p, pprime, supported_only=False)
    if gcd(p, pprime) != 1:
        raise UnsupportedCaseError(f"no conformal background for non-coprime ({p}, {pprime})")
    expr = (sympy.chebyshevt(p, Y) - sympy.chebyshevt(pprime, X)) / 2 ** (p - 1)
    curve = BivariatePolynomial.from_expr(expr, label=f"Gcl({p},{pprime})")
    if verify:
        pair = lax_pair(p, pprime, ring=ring).subs(chebyshev_background(p, pprime, ring))
        companion = spectral_curve_of(pair)
        if sympy.expand(companion.as_expr() - curve.as_expr()) != 0:
            raise DslError(f"companion curve of ({p},{pprime}) differs from the Chebyshev form")
    return curve


# Airy check for (2, 1)


def _airy_wave(gs: float, zeta: float, t: np.ndarray) -> np.ndarray:
    scale = (np.sqrt(2.0) * gs) ** (-2.0 / 3.0)
    return np.array([airy_eval(scale * (zeta + x)) for x in np.ravel(t)]).reshape(np.shape(t))


def _airy_residual_at(gs: float, t: np.ndarray, zeta: float, h: float) -> float:
    offsets = np.arange(-3, 4) * h
    psi = _airy_wave(gs, zeta, t[:, None] + offsets[None, :])
    d2 = psi @ _STENCIL / h**2
    center = psi[:, 3]
    # P ψ - zeta ψ with P = 2 ∂^2 - t
    return float(np.max(np.abs(2.0 * gs**2 * d2 - t * center - zeta * center)))


def airy_residual(gs: float, t_grid: Sequence[float], zeta: float, step: Optional[float] = None) -> float:
    """max |P ψ - zeta ψ| for ψ = Ai((√2 g_s)^(-2/3) (zeta + t)), by finite differences."""
    if gs <= 0:
        raise ValidationError(f"g_s must be positive, got {gs}")
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValidationError("empty t grid")
    scale = (np.sqrt(2.0) * gs) ** (-2.0 / 3.0)
    h = step if step is not None else 0.02 / scale
    coarse = _airy_residual_at(gs, t, zeta, h)
    fine = _airy_residual_at(gs, t, zeta, h / 2.0)
    if fine > 2.0 * coarse + 1e-8:
        raise NumericalError(f"finite differences not converging: {coarse:.3e} -> {fine:.3e}")
    logger.debug(f"Airy residual g_s={gs}: {fine:.3e}")
    return fine
