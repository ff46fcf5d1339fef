"""Potts model on random triangulations: exponents, spectral curves and the Y-resolvent.

The Y-resolvent W_Y is solved in the variable w = sqrt(z - delta_U), where it
splits as f(w) + f(-w) with f the Stieltjes transform of rho_Y(delta_U + w^2).
The density is expanded on the band as sqrt(1 - s^2) sum_k a_k U_k(s) and the
saddle-point equation 2 Re f(w) + (2 - q) f(-w) = R(w) is projected onto
Chebyshev polynomials.
"""

import itertools
import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import sympy
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as npoly
from scipy import optimize, special

from src.config import settings
from src.core.errors import (
    NewtonDivergenceError,
    PottsError,
    UnsupportedCaseError,
    ValidationError,
)
from src.core.freeprob import OneCutSolution, one_cut_solve
from src.core.models import CriticalPoint, CutSide, EllipticWY, ScalingFit
from src.core.polynomials import T2, T3, T4, X, Y, BivariatePolynomial
from src.core.specfun import chebyshev_t, torus_from_band, w_of_sigma

logger = logging.getLogger(__name__)

DENSITY_MODES = 24
ELLIPTIC_TERMS = 3


# Exponents


def nu_gamma(q: float) -> Tuple[float, float]:
    """nu = arccos((q-2)/2)/pi and the string exponent gamma_s = nu/(nu-2)."""
    if not 0.0 < q <= 4.0:
        raise ValidationError(f"q={q} outside (0, 4]")
    nu = math.acos((q - 2.0) / 2.0) / math.pi
    return nu, nu / (nu - 2.0)


def kpz(c_matter: float) -> float:
    """gamma_s = (c - 1 - sqrt((1 - c)(25 - c))) / 12 on the principal branch."""
    if c_matter > 1.0:
        raise ValidationError(f"central charge {c_matter} > 1 has no real string exponent")
    return (c_matter - 1.0 - math.sqrt((1.0 - c_matter) * (25.0 - c_matter))) / 12.0


def _as_fraction_text(value: float) -> str:
    return str(Fraction(value).limit_denominator(1000))


# Curve templates


def _constant(p: int, i: int, j: int) -> sympy.Symbol:
    return sympy.Symbol(f"c{p}_{i}_{j}")


def _template_expr(q: int, k: int, p: int):
    x, y, t2, t3, t4 = X, Y, T2, T3, T4
    c = lambda i, j: _constant(p, i, j)  # noqa: E731

    if (q, k, p) == (1, 2, 1):
        expr = (
            x**4 - x**3 * y + t3 / t4 * x**3 + y**2 / t4 - t3 / t4 * x**2 * y
            + (t2 + t4) / t4 * x**2 - (t2 + 1) / t4 * x * y
            - c(0, 0) * x + c(1, 1) * y + c(1, 0)
        )
        return expr, [c(0, 0), c(1, 1), c(1, 0)]

    if (q, k, p) == (2, 1, 1):
        # the linear constant multiplies y: -t3 F(x, x + y) is then symmetric in x and y
        expr = (
            x**4 - 2 * x**3 * y - y**3 / t3 + (1 - t2) / t3**2 * y**2 + x**2 * y**2
            - (t2 + 2) / t3 * x**2 * y + (t3**2 - t2**2) / t3**2 * x**2
            + (t2 + 2) / t3 * x * y**2 + (t2**2 - t3**2) / t3**2 * x * y
            + c(1, 1) * y + c(1, 0)
        )
        return expr, [c(1, 1), c(1, 0)]

    if (q, k, p) == (2, 1, 2):
        expr = (
            x**4 + 4 * t2 / t3 * x**3 + 4 / t3 * y**3 - x**2 * y**2
            - (4 + 2 * t2) / t3 * x**2 * y - 2 * t2 / t3 * x * y**2
            + (4 * t2**2 + 2 * t3**2) / t3**2 * x**2 + 8 * t2 / t3**2 * y**2
            - 4 * t2 * (2 + t2) / t3**2 * x * y
            - c(0, 0) * x + c(1, 1) * y + c(1, 0)
        )
        return expr, [c(0, 0), c(1, 1), c(1, 0)]

    if (q, k, p) == (3, 1, 1):
        expr = (
            x**6
            + x**5 * (-6 * t2 / t3 - 6 * y)
            - 4 * y**5 / t3
            + x**4 * (13 * y**2 + (24 * t2 - 6) / t3 * y + (9 * t2**2 + 2 * t3**2) / t3**2)
            + (17 - 18 * t2) / t3**2 * y**4
            + x**3 * (
                (24 - 28 * t2) / t3 * y**2
                + (-12 * t2**2 + 24 * t2 - 8 * t3**2) / t3**2 * y
                - 12 * y**3
                - c(0, 0)
            )
            + x**2 * (
                c(1, 1) * y + c(1, 0)
                + (6 * t2 - 30) / t3 * y**3
                + (-15 * t2**2 - 54 * t2 + 10 * t3**2 + 9) / t3**2 * y**2
                + 4 * y**4
            )
            + x * (
                -c(2, 2) * y**2 - c(2, 1) * y - c(2, 0)
                + (4 * t2 + 12) / t3 * y**4
                + (18 * t2**2 + 24 * t2 - 4 * t3**2 - 18) / t3**2 * y**3
            )
            + c(3, 3) * y**3 + c(3, 2) * y**2 + c(3, 1) * y + c(3, 0)
        )
        names = [(0, 0), (1, 1), (1, 0), (2, 2), (2, 1), (2, 0), (3, 3), (3, 2), (3, 1), (3, 0)]
        return expr, [c(i, j) for i, j in names]

    if (q, k, p) == (3, 1, 3):
        expr = (
            x**6
            + x**5 * (18 * t2 / t3 + 6 * y)
            + 108 * y**5 / t3
            + x**4 * (9 * y**2 + (72 * t2 - 18) / t3 * y + (117 * t2**2 + 6 * t3**2) / t3**2)
            + (702 * t2 - 243) / t3**2 * y**4
            + x**3 * (
                -4 * y**3 + (36 * t2 - 72) / t3 * y**2
                + (24 * t3**2 + 252 * t2**2 - 216 * t2) / t3**2 * y
                - c(0, 0)
            )
            + x**2 * (
                -12 * y**4 - (90 * t2 + 54) / t3 * y**3
                + (81 - 486 * t2 - 135 * t2**2 + 18 * t3**2) / t3**2 * y**2
                + c(1, 1) * y + c(1, 0)
            )
            + x * (
                36 * (1 - t2) / t3 * y**4
                + (162 - 234 * t2**2 - 12 * t3**2) / t3**2 * y**3
                - c(2, 2) * y**2 - c(2, 1) * y - c(2, 0)
            )
            + c(3, 3) * y**3 + c(3, 2) * y**2 + c(3, 1) * y + c(3, 0)
        )
        names = [(0, 0), (1, 1), (1, 0), (2, 2), (2, 1), (2, 0), (3, 3), (3, 2), (3, 1), (3, 0)]
        return expr, [c(i, j) for i, j in names]

    raise UnsupportedCaseError(f"no curve template for (q, k, p) = {(q, k, p)}")


def curve_template(q: int, k: int, p: int) -> BivariatePolynomial:
    """F_(p)(x, y) with the curve constants left symbolic."""
    expr, constants = _template_expr(q, k, p)
    return BivariatePolynomial.from_expr(
        expr, constants=constants, label=f"F_({p}) q={q} k={k}", q=q, k=k, p=p
    )


def e_polynomial(curve: BivariatePolynomial) -> BivariatePolynomial:
    """F(x, x + y) normalized so that its highest pure power of x is monic."""
    shifted = sympy.expand(curve.as_expr().subs(Y, X + Y))
    terms = sympy.Poly(shifted, X, Y).terms()
    numeric = [abs(complex(sympy.N(c))) for _, c in terms if not c.free_symbols]
    floor = 1e-12 * max(numeric, default=0.0)

    def nonzero(coeff) -> bool:
        if coeff.free_symbols:
            return sympy.simplify(coeff) != 0
        return abs(complex(sympy.N(coeff))) > floor

    pure = {i: coeff for (i, j), coeff in terms if j == 0 and nonzero(coeff)}
    if not pure:
        raise PottsError("F(x, x + y) has no pure power of x")
    lead = pure[max(pure)]
    return BivariatePolynomial.from_expr(
        sympy.expand(shifted / lead), constants=curve.constants, label=f"E from {curve.label}"
    )


# Rational parametrizations


def one_matrix_parametrization(t2: float, t3: float, t4: float = 0.0, steps: int = 12) -> OneCutSolution:
    """Zhukovsky solution for V'(x) = (t2 - 1) x + t3 x^2 + t4 x^3, continued from the Gaussian point."""
    if t2 <= 1.0:
        raise ValidationError(f"t2={t2} must exceed 1 for a one-cut start")
    seed = None
    sol = None
    for lam in np.linspace(1.0 / steps, 1.0, steps):
        sol = one_cut_solve([0.0, t2 - 1.0, lam * t3, lam * t4], seed=seed)
        seed = (sol.gamma, sol.alpha0)
    return sol


class TwoMatrixParametrization:
    """x(s) = gamma s + a0 + a1/s + a2/s^2 and y(s) = x(1/s) for the symmetric cubic chain of two."""

    def __init__(self, t2: float, t3: float, gamma: float, alphas: Sequence[float]):
        self.t2 = t2
        self.t3 = t3
        self.gamma = gamma
        self.a0, self.a1, self.a2 = (float(a) for a in alphas)

    def x(self, s):
        return self.gamma * s + self.a0 + self.a1 / s + self.a2 / s**2

    def y(self, s):
        return self.x(1.0 / s)

    def vprime(self, x):
        return (self.t2 - 1.0) * x + self.t3 * x**2

    def s_of_x(self, x: complex) -> complex:
        roots = np.roots([self.gamma, self.a0 - complex(x), self.a1, self.a2])
        return complex(max(roots, key=abs))

    def resolvent(self, x: complex) -> complex:
        """W_(1)(x) = V'(x) - y(s(x)) on the physical sheet."""
        s = self.s_of_x(x)
        return self.vprime(complex(x)) - self.y(s)


def _two_matrix_equations(v, a: float, t3: float):
    gamma, a0, a1, a2 = v
    return [
        t3 * gamma**2 - a2,
        a * gamma + 2.0 * t3 * gamma * a0 - a1,
        a * a0 + t3 * (a0**2 + 2.0 * gamma * a1) - a0,
        a * a1 + t3 * (2.0 * gamma * a2 + 2.0 * a0 * a1) - gamma - 1.0 / gamma,
    ]


def two_matrix_parametrization(t2: float, t3: float, steps: int = 20) -> TwoMatrixParametrization:
    """Solve [V'(x(s)) - y(s)] = 1/(gamma s) + O(s^-2), continued in t3 from the Gaussian point.

    Domain: t2 > 2. The t3 = 0 start is the coupled Gaussian pair, whose quadratic
    form (t2 - 1 on the diagonal, -1 off it) is positive only for t2 > 2; the
    Ising critical points (t2c = 2 + 2 sqrt 7) lie well inside.
    """
    a = t2 - 1.0
    if a <= 1.0:
        raise ValidationError(f"t2={t2} must exceed 2 for the Gaussian start")
    gamma = 1.0 / math.sqrt(a * a - 1.0)
    guess = [gamma, 0.0, a * gamma, 0.0]
    for t in np.linspace(t3 / steps, t3, steps):
        root, info, ier, msg = optimize.fsolve(
            _two_matrix_equations, guess, args=(a, t), full_output=True, xtol=1e-14
        )
        # ier = 4 (no further progress at machine precision) is fine; the residual decides
        if max(abs(r) for r in info["fvec"]) > 1e-10:
            raise NewtonDivergenceError(f"two-matrix parametrization failed at t3={t:.6g}: {msg}")
        guess = list(root)
    logger.debug(f"two_matrix_parametrization: gamma={guess[0]:.12g} alphas={guess[1:]}")
    return TwoMatrixParametrization(t2, t3, guess[0], guess[1:])


# Elliptic Y-resolvent


def _psi(x):
    """x - sqrt(x^2 - 1) with |psi| < 1 off [-1, 1], computed as 1 / (x + sqrt(x^2 - 1)).

    The reciprocal form stays accurate for large |x|.
    """
    x = np.asarray(x, dtype=complex)
    return 1.0 / (x + np.sqrt(x - 1.0) * np.sqrt(x + 1.0))


def _rhs(q: float, t2: float, t3: float, delta: float, w):
    return delta + w**2 - q * w / math.sqrt(t3) + q * t2 / (2.0 * t3)


def _collocate(q: float, t2: float, t3: float, delta: float, wm: float, wp: float, modes: int):
    """Density coefficients for a trial band, and the three scalar conditions."""
    c, r = 0.5 * (wm + wp), 0.5 * (wp - wm)
    shift = 2.0 * c / r
    deg = 2 * modes
    P = np.empty((deg + 1, modes))
    for k in range(modes):
        P[:, k] = cheb.chebinterpolate(lambda s, k=k: np.real(_psi(-s - shift) ** (k + 1)), deg)
    R = cheb.chebinterpolate(lambda s: _rhs(q, t2, t3, delta, c + r * s), deg)

    M = 2.0 * math.pi * np.eye(modes) + (2.0 - q) * math.pi * P[1 : modes + 1, :]
    a = np.linalg.solve(M, R[1 : modes + 1])

    m0 = r * a[0] * math.pi / 2.0
    m1 = r * (c * a[0] * math.pi / 2.0 + r * a[1] * math.pi / 4.0)
    solvability = R[0] - (2.0 - q) * math.pi * float(P[0, :] @ a)
    normalization = 2.0 * m1 - 1.0
    shift_eq = (t2**2 / (4.0 * t3) + delta - 2.0 * math.sqrt(t3) * m0) / (1.0 + t2**2 / (4.0 * t3))
    return a, np.array([solvability, normalization, shift_eq])


class EllipticResolvent:
    """Evaluator of W_Y on its first and second sheets from solved band data."""

    def __init__(self, data: EllipticWY):
        self.data = data
        wm, wp = data.w_band
        self._c = 0.5 * (wm + wp)
        self._r = 0.5 * (wp - wm)
        self._series = np.concatenate([[0.0], np.asarray(data.density_coeffs, dtype=float)])

    @property
    def q(self) -> float:
        return self.data.q

    def w_of_z(self, z):
        return np.sqrt(np.asarray(z, dtype=complex) - self.data.delta_U)

    def f(self, w):
        """Stieltjes transform of rho_Y(delta_U + w^2) in the w-plane."""
        psi = _psi((np.asarray(w, dtype=complex) - self._c) / self._r)
        return math.pi * npoly.polyval(psi, self._series)

    def f_regular(self, w):
        q, t2, t3 = self.data.q, self.data.t2, self.data.t3
        return q * t2 / (2.0 * t3 * (4.0 - q)) - w / math.sqrt(t3) + (self.data.delta_U + w**2) / (4.0 - q)

    def f_singular(self, w):
        return self.f_regular(w) - self.f(w)

    def __call__(self, z):
        w = self.w_of_z(z)
        out = self.f(w) + self.f(-w)
        return out if np.ndim(out) else complex(out)

    def second_sheet(self, z):
        """Continuation of W_Y through the band."""
        d = self.data
        w = self.w_of_z(z)
        out = _rhs(d.q, d.t2, d.t3, d.delta_U, w) - (1.0 - d.q) * self.f(-w) - self.f(w)
        return out if np.ndim(out) else complex(out)

    def boundary(self, x: float, side: CutSide) -> complex:
        eps = settings.BOUNDARY_EPS
        return self(complex(x, eps if side == CutSide.PLUS else -eps))

    def density(self, x):
        """rho_Y on the band, zero outside."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.data.band
        out = np.zeros_like(x)
        inside = (x > lo) & (x < hi)
        s = (np.sqrt(x[inside] - self.data.delta_U) - self._c) / self._r
        total = np.zeros_like(s)
        for k, a in enumerate(self.data.density_coeffs):
            total += a * special.eval_chebyu(k, s)
        out[inside] = np.sqrt(np.clip(1.0 - s * s, 0.0, None)) * total
        return out if out.size > 1 else float(out[0])


def _check_density(q, t2, t3, delta, wm, wp, a):
    s = np.linspace(-1.0, 1.0, 401)[1:-1]
    values = np.sqrt(1.0 - s * s) * sum(ak * special.eval_chebyu(k, s) for k, ak in enumerate(a))
    if values.min() < -1e-8 * max(1.0, values.max()):
        logger.error(f"elliptic_WY: negative density {values.min():.3e} at q={q} t2={t2} t3={t3}")
        raise PottsError(f"negative density at (q={q}, t2={t2}, t3={t3}): phase boundary crossed")


def _elliptic_coefficients(ev: EllipticResolvent, nu: float, terms: int = ELLIPTIC_TERMS,
                           points: int = 24) -> Tuple[complex, List[complex], float]:
    """Fit f_sing(w(sigma)) on the theta-quotient basis around the pole sigma = (1 + tau)/2."""
    wm, wp = ev.data.w_band
    torus = torus_from_band(wm, wp)
    tau = complex(torus.tau)
    center = 0.5 * (1.0 + tau)
    radius = 0.25 * min(1.0, abs(tau))
    sigmas = center + radius * np.exp(2j * math.pi * (np.arange(points) + 0.5) / points)

    with mpmath.workdps(30):
        nome = mpmath.exp(1j * mpmath.pi * tau)
        shift = mpmath.pi * tau * nu / 2

        def quotient(s):
            th = mpmath.jtheta(3, mpmath.pi * s, nome)
            plus = mpmath.exp(1j * mpmath.pi * nu * (s - 1)) * mpmath.jtheta(3, mpmath.pi * s + shift, nome)
            minus = mpmath.exp(-1j * mpmath.pi * nu * (s - 1)) * mpmath.jtheta(3, mpmath.pi * s - shift, nome)
            return (plus + minus) / th

        basis = np.array(
            [
                [complex(mpmath.diff(quotient, mpmath.mpc(s), n)) / math.factorial(n) for n in range(terms)]
                for s in sigmas
            ]
        )

    target = np.array([complex(ev.f_singular(w_of_sigma(torus, s))) for s in sigmas])
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = float(np.linalg.norm(basis @ coeffs - target) / max(np.linalg.norm(target), 1e-300))
    return tau, [complex(c) for c in coeffs], residual


def elliptic_WY(q: float, t2: float, t3: float, modes: int = DENSITY_MODES) -> EllipticWY:
    """Single-cut Y-resolvent for cubic U = t2 z^2/2 + t3 z^3/3.

    Solves for (delta_U, z-, z+) and the density on the band by continuation in
    t3 from the decoupled limit, then fits the elliptic coefficients f_n.
    """
    if not 0.0 < q < 4.0:
        raise ValidationError(f"q={q} outside (0, 4)")
    if t3 <= 0.0:
        raise ValidationError(f"t3={t3} must be positive")
    if t2 <= q:
        raise ValidationError(f"t2={t2} must exceed q={q} for a stable Gaussian start")
    nu, _ = nu_gamma(q)

    start = min(t3, 0.02)
    v = t2 / (t2 - q)
    delta = -(t2**2) / (4.0 * start) + 2.0 * start / t2
    guess = np.array([delta, math.sqrt(-2.0 * math.sqrt(v) - delta), math.sqrt(2.0 * math.sqrt(v) - delta)])
    steps = 1 if t3 <= start else int(math.ceil(math.log(t3 / start) / math.log(1.3))) + 1
    path = np.geomspace(start, t3, steps) if steps > 1 else [t3]

    def equations(u, t):
        d, wm, wp = u
        if not 0.0 < wm < wp:
            return np.full(3, 1e6)
        _, res = _collocate(q, t2, t, d, wm, wp, modes)
        return res

    for t in path:
        root, info, ier, msg = optimize.fsolve(equations, guess, args=(t,), full_output=True, xtol=1e-13)
        err = float(np.max(np.abs(info["fvec"])))
        if err > 1e-9:
            logger.error(f"elliptic_WY: continuation failed at t3={t:.6g} ({msg})")
            raise NewtonDivergenceError(f"band equations diverged at t3={t:.6g}: {msg}")
        guess = root
        logger.debug(f"elliptic_WY: t3={t:.6g} delta={root[0]:.10g} w=({root[1]:.10g}, {root[2]:.10g})")

    delta, wm, wp = (float(u) for u in guess)
    a, res = _collocate(q, t2, t3, delta, wm, wp, modes)
    if np.max(np.abs(res)) > 1e-9:
        raise NewtonDivergenceError(f"band equations residual {np.max(np.abs(res)):.3e}")
    _check_density(q, t2, t3, delta, wm, wp, a)

    data = EllipticWY(
        q=q, t2=t2, t3=t3, nu=nu, delta_U=delta,
        band=(delta + wm * wm, delta + wp * wp),
        f_coeffs=[], tau=1j, density_coeffs=[float(x) for x in a],
    )
    tau, f_coeffs, fit_residual = _elliptic_coefficients(EllipticResolvent(data), nu)
    data = data.model_copy(update={"tau": tau, "f_coeffs": f_coeffs, "residual": fit_residual})
    logger.info(
        f"elliptic_WY q={q} t2={t2} t3={t3}: band=({data.band[0]:.8f}, {data.band[1]:.8f}) "
        f"delta_U={delta:.8f} tau={tau:.6f} theta-fit residual={fit_residual:.2e}"
    )
    return data


# G-transform


def g_transform(WY: EllipticResolvent, p: int, q: int, z: complex, side: Optional[CutSide] = None) -> complex:
    """G_Y^(p)(z) = (p/q)(z - W_Y(z)_-) + ((q-p)/q) W_Y(z)_+.

    The upper lip (side PLUS, default for Im z >= 0) takes W_+ from the first
    sheet and W_- as the continuation of the lower lip; MINUS swaps the two.
    """
    if not 0 <= p <= q:
        raise ValidationError(f"p={p} outside 0..{q}")
    z = complex(z)
    if side is None:
        side = CutSide.PLUS if z.imag >= 0.0 else CutSide.MINUS
    first, second = WY(z), WY.second_sheet(z)
    w_plus, w_minus = (first, second) if side == CutSide.PLUS else (second, first)
    return (p / q) * (z - w_minus) + ((q - p) / q) * w_plus


def g_inverse(WY: EllipticResolvent, p: int, q: int, x: complex, start: complex,
              side: Optional[CutSide] = CutSide.PLUS) -> complex:
    """Solve G_Y^(p)(y) = x by Newton's method from start."""
    y = complex(start)
    for it in range(settings.NEWTON_MAX_ITER):
        h = 1e-6 * max(1.0, abs(y))
        value = g_transform(WY, p, q, y, side) - x
        slope = (g_transform(WY, p, q, y + h, side) - g_transform(WY, p, q, y - h, side)) / (2.0 * h)
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = value / slope
        y -= step
        if abs(step) < 1e-12 * max(1.0, abs(y)):
            return y
    raise NewtonDivergenceError(f"G-inversion for p={p} did not converge at x={x}")


def resolvent_from_curve(WY: EllipticResolvent, p: int, x: complex, branch: str = "identity") -> complex:
    """W_(p)(x) read off the G-transform.

    branch="identity" uses G^Y_(q)(x) = x + W_(q)(x) (needs p = q);
    branch="potential" uses G^Y_(1)(x) = U'(x) - W_(1)(x) (needs p = 1).
    """
    d = WY.data
    q = int(round(d.q))
    x = complex(x)
    if branch == "identity":
        if p != q:
            raise UnsupportedCaseError("the identity branch gives W_(q) only")
        y = g_inverse(WY, q, q, x, start=x + 1.0 / x, side=CutSide.MINUS)
        result = y - x
    elif branch == "potential":
        if p != 1:
            raise UnsupportedCaseError("the potential branch gives W_(1) only")
        uprime = d.t3 * x * x + d.t2 * x
        y = g_inverse(WY, 1, q, x, start=uprime, side=CutSide.PLUS)
        result = uprime - y
    else:
        raise ValidationError(f"unknown branch {branch!r}")
    if abs(x) > 10.0 * max(abs(b) for b in d.band) and abs(x * result - 1.0) > 0.5:
        raise PottsError(f"branch {branch} at x={x} does not behave like 1/x: {result}")
    return result


def dual_inverse_residual(WY: EllipticResolvent, p: int, xs: Sequence[complex]) -> float:
    """max |H_(q-p)(H_p(x)) - x| with H_r(x) = G^Y_(r)(x) - x.

    H_p is read on the physical branch (potential side, so p = 1); H_(q-p) is
    then inverted on the opposite lip by a second Newton solve.
    """
    if p != 1:
        raise UnsupportedCaseError("the physical branch of G^Y_(p) is available for p = 1 only")
    d = WY.data
    q = int(round(d.q))
    worst = 0.0
    for x in xs:
        x = complex(x)
        y = g_inverse(WY, p, q, x, start=d.t3 * x * x + d.t2 * x, side=CutSide.PLUS)
        u = y - x
        y2 = g_inverse(WY, q - p, q, u, start=y * (1.0 + 1e-3), side=CutSide.MINUS)
        worst = max(worst, abs((y2 - u) - x))
    logger.debug(f"dual_inverse_residual q={q} p={p}: {worst:.3e}")
    return worst


def dual_relation_check(curve: BivariatePolynomial, G: Callable[[complex], complex],
                        grid: Sequence[complex]) -> float:
    """max over the grid of |F(G(z) - z, G(z))| relative to the size of its terms."""
    points = np.asarray([complex(G(z)) for z in grid])
    zs = np.asarray(grid, dtype=complex)
    return curve.relative_residual(points - zs, points)


# Constant fixing


def _circles(center: float, radii: Sequence[float], count: int, phase: float):
    theta = 2.0 * math.pi * (np.arange(count) + phase) / count
    return np.concatenate([center + r * np.exp(1j * theta) for r in radii])


def curve_samples(q: int, k: int, p: int, t2: float, t3: float, t4: float = 0.0, count: int = 24,
                  phase: float = 0.25, source: str = "auto", far: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Points (x, y) on F_(p)(x, y) = 0 built from a solved model.

    source="auto" uses the rational parametrization where one exists and the
    elliptic Y-resolvent otherwise; "elliptic" forces the latter. far=True
    moves the rings outward on the physical sheet, away from the cut.
    """
    if source not in ("auto", "elliptic"):
        raise ValidationError(f"unknown sample source {source!r}")
    theta = 2.0 * math.pi * (np.arange(count) + phase) / count
    rings = (4.0, 8.0) if far else (1.3, 1.8, 2.6)
    if source == "auto" and (q, k, p) == (1, 2, 1):
        sol = one_matrix_parametrization(t2, t3, t4)
        s = np.concatenate([r * np.exp(1j * theta) for r in rings])
        xs = np.array([sol.x_of_s(v) for v in s])
        return xs, xs + np.array([sol.resolvent_s(v) for v in s])
    if source == "auto" and (q, k, p) == (2, 1, 1):
        tm = two_matrix_parametrization(t2, t3)
        s = np.concatenate([r * np.exp(1j * theta) for r in rings])
        xs = tm.x(s)
        return xs, xs + tm.y(s)
    if k != 1:
        raise UnsupportedCaseError(f"no sampler for (q, k, p) = {(q, k, p)}")

    WY = EllipticResolvent(elliptic_WY(q, t2, t3))
    lo, hi = WY.data.band
    gap = lo - WY.data.delta_U
    # circles enclose the band and stay right of delta_U
    radii = [0.5 * (hi - lo) + f * gap for f in ((0.7, 0.85) if far else (0.3, 0.55, 0.8))]
    ys = _circles(0.5 * (lo + hi), radii, count, phase)
    ys = ys[np.abs(ys.imag) > 1e-3 * radii[0]]
    xs = np.array([g_transform(WY, p, q, y, CutSide.PLUS) for y in ys])
    return xs, ys


Terms = Dict[Tuple[int, int], complex]


def _combine(family: Sequence[Terms], values: Sequence[float]) -> Terms:
    """F_0 + sum_m c_m F_m for a template that is linear in its constants."""
    out = dict(family[0])
    for value, part in zip(values, family[1:]):
        for mono, coeff in part.items():
            out[mono] = out.get(mono, 0.0) + value * coeff
    return out


def _evaluate(terms: Terms, x, y, dx: int = 0, dy: int = 0, absolute: bool = False):
    """d^dx/dx d^dy/dy of the polynomial, or the sum of the moduli of its terms."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    total = np.zeros(np.broadcast(x, y).shape, dtype=float if absolute else complex)
    for (i, j), c in terms.items():
        if i < dx or j < dy:
            continue
        term = math.perm(i, dx) * math.perm(j, dy) * c * x ** (i - dx) * y ** (j - dy)
        total = total + (np.abs(term) if absolute else term)
    return total


def _node_residuals(terms: Terms, x: complex, y: complex) -> np.ndarray:
    """F, F_x and F_y at (x, y), each relative to its coefficient size."""
    ax, ay = max(1.0, abs(x)), max(1.0, abs(y))
    out = []
    for dx, dy in ((0, 0), (1, 0), (0, 1)):
        scale = sum(abs(math.perm(i, dx) * math.perm(j, dy) * c) * ax ** (i - dx) * ay ** (j - dy)
                    for (i, j), c in terms.items() if i >= dx and j >= dy)
        out.append(complex(_evaluate(terms, x, y, dx, dy)) / max(scale, 1e-300))
    return np.array(out)


def _split(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values.real, values.imag])


def _refine_node(terms: Terms, x0: complex, y0: complex, tol: float) -> Optional[Tuple[complex, complex]]:
    sol = optimize.least_squares(
        lambda v: _split(_node_residuals(terms, complex(v[0], v[1]), complex(v[2], v[3]))),
        [x0.real, x0.imag, y0.real, y0.imag], method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14,
    )
    if np.max(np.abs(sol.fun)) > tol:
        return None
    return complex(sol.x[0], sol.x[1]), complex(sol.x[2], sol.x[3])


def singular_points(curve: BivariatePolynomial, tol: float = 1e-8) -> List[Tuple[complex, complex]]:
    """Finite double points (x0, y0) of a numeric curve: F = F_x = F_y = 0.

    Candidates are the repeated roots of disc_y F, paired with the two closest
    roots of F(x0, y); a candidate is kept only if it refines to a singular point.
    """
    terms = curve.numeric_coefficients()
    deg_y = curve.degrees[1]
    found: List[Tuple[complex, complex]] = []
    if deg_y < 2:
        return found
    for x0, multiplicity in discriminant_nodes(curve, tol=1e-4):
        if multiplicity < 2:
            continue
        column = [sum(c * x0**i for (i, j), c in terms.items() if j == d) for d in range(deg_y, -1, -1)]
        roots = np.roots(column)
        if len(roots) < 2:
            continue
        a, b = min(itertools.combinations(roots, 2), key=lambda ab: abs(ab[0] - ab[1]))
        node = _refine_node(terms, x0, 0.5 * (a + b), tol)
        if node is None:
            logger.debug(f"singular_points: repeated root x={x0:.6g} is not a double point")
            continue
        if all(abs(node[0] - n[0]) + abs(node[1] - n[1]) > 1e-6 * (1.0 + abs(node[0])) for n in found):
            found.append(node)
    return found


def _fit_constants(family: Sequence[Terms], xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Real least-squares values of the constants on one point set."""
    scale = np.maximum(_evaluate(family[0], xs, ys, absolute=True), 1e-300)
    A = np.column_stack([_evaluate(part, xs, ys) / scale for part in family[1:]])
    b = -_evaluate(family[0], xs, ys) / scale
    values, *_ = np.linalg.lstsq(np.vstack([A.real, A.imag]), np.concatenate([b.real, b.imag]), rcond=None)
    return values


def _joint_newton(family: Sequence[Terms], seed: np.ndarray, nodes: Sequence[Tuple[complex, complex]],
                  xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, float]:
    """Newton on the far-ring conditions together with F = F_x = F_y = 0 at every node."""
    n = len(seed)
    ring_scale = np.maximum(_evaluate(_combine(family, seed), xs, ys, absolute=True), 1e-300)

    def residual(v: np.ndarray) -> np.ndarray:
        terms = _combine(family, v[:n])
        blocks = [_evaluate(terms, xs, ys) / ring_scale]
        for m in range(len(nodes)):
            a = v[n + 4 * m:n + 4 * m + 4]
            blocks.append(_node_residuals(terms, complex(a[0], a[1]), complex(a[2], a[3])))
        return _split(np.concatenate(blocks))

    start = list(seed)
    for x0, y0 in nodes:
        start += [x0.real, x0.imag, y0.real, y0.imag]
    sol = optimize.least_squares(residual, start, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14)
    return sol.x[:n], float(np.max(np.abs(sol.fun)))


def fix_constants(template: BivariatePolynomial, q: int, k: int, t2: float, t3: float,
                  t4: float = 0.0, tol: float = 1e-8, source: str = "auto") -> BivariatePolynomial:
    """Determine the curve constants of a template at given couplings.

    The constants solve, by Newton iteration, the joint system of the curve
    equation on far rings of the physical sheet and the double-point conditions
    F = F_x = F_y = 0 at every finite node, which make the curve genus zero.
    The template is linear in its constants, so a least-squares fit on an
    inner ring seeds the iteration and locates the nodes. The fit is kept as a
    cross-check and the result is verified on a third ring.
    """
    if template.p is None or (template.q, template.k) != (q, k):
        raise ValidationError("template does not match (q, k)")
    couplings = {T2: sympy.Float(t2, 30), T3: sympy.Float(t3, 30)}
    if k == 2:
        if t4 <= 0.0:
            raise ValidationError("k=2 templates need t4 > 0")
        couplings[T4] = sympy.Float(t4, 30)
    elif t4 != 0.0:
        raise ValidationError("t4 is only used by k=2 templates")

    concrete = template.subs(couplings)
    constants = list(template.constants)
    known = concrete.subs({c: 0 for c in constants})
    family: List[Terms] = [known.numeric_coefficients()]
    for c in constants:
        others = {o: 0 for o in constants if o != c}
        part = concrete.subs({**others, c: 1}).as_expr() - known.as_expr()
        family.append(BivariatePolynomial.from_expr(part).numeric_coefficients())

    def with_values(values) -> BivariatePolynomial:
        fixed = concrete.subs({c: sympy.Float(float(v), 20) for c, v in zip(constants, values)})
        return fixed.model_copy(update={"q": q, "k": k, "p": template.p, "constants": ()})

    xs, ys = curve_samples(q, k, template.p, t2, t3, t4, phase=0.25, source=source)
    fitted = _fit_constants(family, xs, ys)
    nodes = singular_points(with_values(fitted), tol=max(tol, 1e-8))

    fx, fy = curve_samples(q, k, template.p, t2, t3, t4, phase=0.4, source=source, far=True)
    values, joint = _joint_newton(family, fitted, nodes, fx, fy)
    logger.info(
        f"fix_constants {template.label} t2={t2} t3={t3} t4={t4}: "
        f"{len(nodes)} nodes, joint residual={joint:.2e}"
    )
    if not np.all(np.isfinite(values)) or joint > tol:
        logger.error(f"fix_constants: Newton residual {joint:.3e} above {tol:.1e}")
        raise NewtonDivergenceError(f"curve constants did not converge: residual {joint:.3e}")
    drift = float(np.max(np.abs(values - fitted) / np.maximum(1.0, np.abs(fitted)), initial=0.0))
    if drift > 1e3 * tol:
        logger.warning(f"fix_constants: Newton and sample fit differ by {drift:.2e}")

    fixed = with_values(values)
    cx, cy = curve_samples(q, k, template.p, t2, t3, t4, phase=0.6, source=source)
    residual = fixed.relative_residual(cx, cy)
    logger.debug(f"fix_constants cross-check residual={residual:.2e} drift={drift:.2e}")
    if residual > tol:
        logger.error(f"fix_constants: residual {residual:.3e} above {tol:.1e}")
        raise NewtonDivergenceError(f"curve constants do not fit: residual {residual:.3e}")
    return fixed


def discriminant_nodes(curve: BivariatePolynomial, tol: float = 1e-6) -> List[Tuple[complex, int]]:
    """Roots in x of disc_y F with their multiplicities; repeated roots are nodes or cusps."""
    poly = sympy.Poly(curve.as_expr(), Y)
    disc = sympy.Poly(sympy.discriminant(poly.as_expr(), Y), X)
    if all(c.is_Rational for c in disc.all_coeffs()):
        exact = sympy.roots(disc, multiple=False)
        if sum(exact.values()) == disc.degree():
            return sorted(((complex(sympy.N(r)), m) for r, m in exact.items()),
                          key=lambda rm: (rm[0].real, rm[0].imag))
    roots = np.roots([complex(sympy.N(c)) for c in disc.all_coeffs()])
    clusters: List[List[complex]] = []
    for r in roots:
        for group in clusters:
            if abs(group[0] - r) < tol * max(1.0, abs(r)):
                group.append(r)
                break
        else:
            clusters.append([r])
    return sorted(((complex(np.mean(g)), len(g)) for g in clusters), key=lambda rm: (rm[0].real, rm[0].imag))


# Critical points


def _real_solutions(solutions: List[dict], keys: Sequence) -> List[Dict]:
    out = []
    for sol in solutions:
        values = {k: complex(sympy.N(sol[k], 30)) for k in keys if k in sol}
        if len(values) != len(keys):
            continue
        if all(abs(v.imag) < 1e-12 * max(1.0, abs(v)) for v in values.values()):
            out.append({str(k): v.real for k, v in values.items()})
    return out


@lru_cache(maxsize=None)
def _critical_solutions(q: int) -> Tuple[Tuple[Tuple[str, float], ...], ...]:
    """All real critical configurations as sorted (name, value) tuples."""
    if q == 1:
        g, a0, a, t = sympy.symbols("gamma alpha0 a t3")
        found = []
        s = sympy.Symbol("s")
        Ys = g * s + a0 + (g + 1 / g) / s + t * g**2 / s**2
        for sc in (-1, 1):
            # the branch points of Y merge with the edge s = sc of the X-cut
            eqs = [
                g**2 * (a + 2 * t * a0) - 1,
                a * a0 + t * (a0**2 + 2 * g**2),
                sympy.numer(sympy.together(sympy.diff(Ys, s).subs(s, sc))),
                sympy.numer(sympy.together(sympy.diff(Ys, s, 2).subs(s, sc))),
            ]
            for sol in _real_solutions(sympy.solve(eqs, [g, a0, a, t], dict=True), [g, a0, a, t]):
                if abs(sol["gamma"]) > 1e-9:
                    sol["t2"] = sol["a"] + 1.0
                    sol["s_c"] = float(sc)
                    found.append(tuple(sorted(sol.items())))
        return tuple(found)

    if q == 2:
        g, a0, a1, a2, a, t = sympy.symbols("gamma alpha0 alpha1 alpha2 a t3")
        eqs = [
            t * g**2 - a2,
            a * g + 2 * t * g * a0 - a1,
            a * a0 + t * (a0**2 + 2 * g * a1) - a0,
            g * (a * a1 + t * (2 * g * a2 + 2 * a0 * a1)) - g**2 - 1,
            g - a1 - 2 * a2,
            2 * a1 + 6 * a2,
        ]
        found = []
        for sol in _real_solutions(sympy.solve(eqs, [g, a0, a1, a2, a, t], dict=True), [g, a0, a1, a2, a, t]):
            if abs(sol["gamma"]) > 1e-9:
                sol["t2"] = sol["a"] + 1.0
                sol["s_c"] = 1.0
                found.append(tuple(sorted(sol.items())))
        return tuple(found)

    if q == 3:
        Xs, Zs, a, S = sympy.symbols("X Z t2 S")
        F = curve_template(3, 1, 1).as_expr()
        E = sympy.expand(F.subs(Y, X + Y))
        conditions = [
            sympy.diff(E, Y, 4),
            sympy.diff(E, X, 1, Y, 3),
            sympy.diff(E, X, 3, Y, 1),
            sympy.diff(E, X, 4),
        ]
        eqs = []
        for cond in conditions:
            # x = X/t3, y = Z/t3 leaves a polynomial in X, Z, t2 and t3^2
            scaled = sympy.expand(cond.subs({X: Xs / T3, Y: Zs / T3}) * T3**2)
            eqs.append(sympy.expand(scaled.subs(T3, sympy.sqrt(S)).subs(T2, a)))
        found = []
        for sol in _real_solutions(sympy.solve(eqs, [Xs, Zs, a, S], dict=True), [Xs, Zs, a, S]):
            if sol["S"] > 0.0:
                sol["t3"] = math.sqrt(sol["S"])
                found.append(tuple(sorted(sol.items())))
        return tuple(found)

    raise UnsupportedCaseError(f"critical points are implemented for q in (1, 2, 3), got {q}")


def critical_points(q: int) -> CriticalPoint:
    """Critical couplings (t2c, t3c) with both sign branches.

    q = 1, 2 come from the rational parametrizations (the edge of Y where x and
    G meet with extra vanishing derivatives); q = 3 from the vanishing fourth
    derivatives of F_(1)(x, x + y).
    """
    solutions = [dict(s) for s in _critical_solutions(q)]
    if not solutions:
        raise PottsError(f"no real critical point found for q={q}")
    branches = set()
    for sol in solutions:
        t2c, t3c = round(sol["t2"], 12), round(abs(sol["t3"]), 12)
        branches.add((t2c, t3c))
        branches.add((t2c, -t3c))
    branches = sorted(branches)
    t2c, t3c = max(branches, key=lambda b: (b[0], b[1]))
    nu, gamma_s = nu_gamma(q)
    logger.info(f"critical_points q={q}: t2c={t2c:.10f} t3c={t3c:.10f} ({len(branches)} branches)")
    return CriticalPoint(
        q=q, t2c=t2c, t3c=t3c, branches=branches,
        gamma_s=_as_fraction_text(gamma_s), nu=_as_fraction_text(nu),
    )


def _physical_critical(q: int) -> Dict[str, float]:
    """The critical configuration with t3 > 0 and the larger t2."""
    candidates = [dict(s) for s in _critical_solutions(q) if dict(s)["t3"] > 0.0]
    return max(candidates, key=lambda s: s["t2"])


# Near-critical scaling


def chebyshev_scaling_profile(q: float, p: float, eta: float) -> float:
    """T_{2-nu}(sqrt eta) - (2p/q) cos(pi nu/2) T_{2-nu}(sqrt(1 - eta)) for eta in [0, 1]."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta={eta} outside [0, 1]")
    nu, _ = nu_gamma(q)
    order = 2.0 - nu
    return (
        chebyshev_t(order, math.sqrt(eta)).real
        - (2.0 * p / q) * math.cos(math.pi * nu / 2.0) * chebyshev_t(order, math.sqrt(1.0 - eta)).real
    )


def _critical_curves(q: int) -> Tuple[Callable, Callable, float]:
    """x(s), G(s) and the critical s for the physical critical point."""
    c = _physical_critical(q)
    g = c["gamma"]
    if q == 1:
        t3 = c["t3"]

        def xs(s):
            return g * (s + 1.0 / s) + c["alpha0"]

        def ys(s):
            return g * s + c["alpha0"] + (g + 1.0 / g) / s + t3 * g**2 / s**2

        return xs, ys, c["s_c"]

    tm = TwoMatrixParametrization(c["t2"], c["t3"], g, (c["alpha0"], c["alpha1"], c["alpha2"]))
    return tm.x, (lambda s: tm.x(s) + tm.y(s)), c["s_c"]


def _profile_increments_q1(etas: Sequence[float], kappa: float = -1e-6) -> List[float]:
    """W_Y - W_reg at z- - eps*eta minus its value at z-, off criticality for q = 1.

    The approach keeps the two branch points of the Y-plane centred on the
    edge s = -1 of the X-cut (Y''(-1) = 0).
    """
    gamma = (1.0 / math.sqrt(2.0)) * (1.0 + kappa)
    t3 = (gamma + 1.0 / gamma) / (3.0 * gamma**2)
    alpha0 = (1.0 / gamma**2 - math.sqrt(1.0 / gamma**4 + 8.0 * t3**2 * gamma**2)) / (2.0 * t3)
    t2 = 1.0 / gamma**2 - 2.0 * t3 * alpha0 + 1.0

    def xs(s):
        return gamma * (s + 1.0 / s) + alpha0

    def ys(s):
        return gamma * s + alpha0 + (gamma + 1.0 / gamma) / s + t3 * gamma**2 / s**2

    roots = np.roots([gamma, 0.0, -(gamma + 1.0 / gamma), -2.0 * t3 * gamma**2])
    near = sorted(roots, key=lambda r: abs(r + 1.0))[:2]
    if any(abs(r.imag) > 1e-9 for r in near):
        raise PottsError("branch points are complex on this side of the critical point")
    s_first, s_second = sorted(r.real for r in near)
    z_minus, delta = ys(s_first), ys(s_second)
    eps = z_minus - delta
    if eps <= 0.0:
        raise PottsError("branch points in the wrong order")

    def excess(s):
        z = ys(s)
        return z - xs(s) - (t2 / t3 + 2.0 * z) / 3.0

    base = excess(s_first)
    out = []
    for eta in etas:
        target = z_minus - eps * eta
        lo = s_first - 0.5
        while ys(lo) > target:
            lo -= 0.5
        s = optimize.brentq(
            lambda v: ys(v) - target, lo, s_first, xtol=1e-16, rtol=4.0 * np.finfo(float).eps
        )
        out.append(excess(s) - base)
    logger.debug(f"q=1 profile: t2={t2:.10f} t3={t3:.10f} eps={eps:.3e}")
    return out


def scaling_coefficient(q: int, eta_grid: Sequence[float] = (0.25, 0.75)) -> ScalingFit:
    """Exponent of the non-analytic part of G at the critical point, and the q = 1 eta-profile.

    Along s = s_c + sigma the curve behaves as x - x_c ~ sigma^m and
    y - y_c ~ sigma^n; the log-log slope of |x - x_c| against |y - y_c| is the
    exponent 1 - nu/2 of W_Y(z- - eps eta) - W_Y(z-).
    """
    if q not in (1, 2):
        raise UnsupportedCaseError(f"scaling fits need a rational parametrization (q = 1, 2), got {q}")
    nu, _ = nu_gamma(q)
    xs, ys, s_c = _critical_curves(q)
    sigma = np.geomspace(1e-3, 1e-2, 12)
    dx = np.abs(xs(s_c + sigma) - xs(s_c))
    dy = np.abs(ys(s_c + sigma) - ys(s_c))
    slope = float(np.polyfit(np.log(dy), np.log(dx), 1)[0])
    expected = 1.0 - nu / 2.0
    logger.info(f"scaling_coefficient q={q}: exponent {slope:.5f} (expected {expected:.5f})")

    ratio = expected_ratio = None
    if q == 1:
        if len(eta_grid) != 2:
            raise ValidationError("the profile check takes two eta values")
        d1, d2 = _profile_increments_q1(eta_grid)
        ratio = d1 / d2
        T = lambda e: chebyshev_t(2.0 - nu, math.sqrt(e)).real  # noqa: E731
        expected_ratio = (T(eta_grid[0]) - T(0.0)) / (T(eta_grid[1]) - T(0.0))
    return ScalingFit(
        q=q, nu=nu, exponent=slope, expected_exponent=expected,
        profile_ratio=ratio, expected_profile_ratio=expected_ratio,
    )
