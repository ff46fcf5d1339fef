"""Special-function kernel.

Chebyshev functions of real order, Jacobi theta series, the band-to-torus map,
the quasi-periodic kernel g(sigma; nu), Airy and Hermite functions.
"""

import cmath
import logging
import math
from typing import Optional

import numpy as np
from scipy import integrate, special

from src.config import settings
from src.core.errors import (
    BranchCutError,
    NumericalError,
    ThetaConvergenceError,
    ValidationError,
)
from src.core.models import ChebKind, ChebSpec, CutSide, TorusParam

logger = logging.getLogger(__name__)

AI0 = 0.355028053887817239260
AIP0 = -0.258819403792806798405


# Chebyshev functions


def _phi(x: complex, side: Optional[CutSide]) -> complex:
    """Principal angle phi with x = cos(pi phi), Re phi in [0, 1]."""
    xr = complex(x)
    if xr.imag == 0.0 and xr.real <= -1.0:
        b = math.acosh(-xr.real)
        if side is None:
            raise BranchCutError(f"x={xr.real} lies on the cut (-inf, -1]; choose a side")
        # x + i0 maps to pi*phi = pi - i b, x - i0 to pi + i b
        return complex(1.0, -b / math.pi if side == CutSide.PLUS else b / math.pi)
    return complex(np.arccos(xr)) / math.pi


def cheb_eval(spec: ChebSpec, x: complex, side: Optional[CutSide] = None) -> complex:
    """T_nu(x) = cos(pi nu phi) or U_nu(x) = sin(pi (nu+1) phi) / sin(pi phi)."""
    if not np.isfinite(complex(x).real) or not np.isfinite(complex(x).imag):
        raise ValidationError(f"non-finite argument {x}")
    nu = spec.order
    if float(nu).is_integer() and side is None:
        # integer order has no discontinuity
        side = CutSide.PLUS
    phi = _phi(x, side)
    if spec.kind == ChebKind.FIRST:
        return complex(np.cos(math.pi * nu * phi))
    s = np.sin(math.pi * phi)
    if abs(s) < 1e-14:
        # removable singularity at phi = 0 or 1
        sign = 1.0 if abs(phi) < 0.5 else math.cos(math.pi * nu)
        return complex(sign * (nu + 1.0))
    return complex(np.sin(math.pi * (nu + 1.0) * phi) / s)


def chebyshev_t(nu: float, x: complex, side: Optional[CutSide] = None) -> complex:
    return cheb_eval(ChebSpec(kind=ChebKind.FIRST, order=nu), x, side)


def chebyshev_u(nu: float, x: complex, side: Optional[CutSide] = None) -> complex:
    return cheb_eval(ChebSpec(kind=ChebKind.SECOND, order=nu), x, side)


def cheb_jump(kind: ChebKind, nu: float, x: float) -> complex:
    """Closed form of f(x+i0) - f(x-i0) on the cut x < -1.

    The square root factor is sqrt(x^2 - 1) > 0, i.e. sqrt(1 - x^2) is read as
    -sqrt(x^2 - 1) along the cut.
    """
    if x >= -1.0:
        raise ValidationError(f"x={x} is not on the cut")
    root = math.sqrt(x * x - 1.0)
    if kind == ChebKind.FIRST:
        return 2j * math.sin(math.pi * nu) * root * chebyshev_u(nu - 1.0, -x)
    return 2j * math.sin(math.pi * nu) / root * chebyshev_t(nu + 1.0, -x)


def cheb_inverse_check(nu, x: float) -> float:
    """|T_{1/nu}(T_nu(x)) - x| on the principal branch."""
    nu = float(nu)
    if nu == 0.0:
        raise ValidationError("order 0 has no functional inverse")
    if not -1.0 < x < 1.0:
        raise ValidationError(f"x={x} outside (-1, 1)")
    inner = chebyshev_t(nu, x).real
    return abs(chebyshev_t(1.0 / nu, inner, CutSide.PLUS) - x)


def chebyshev_scaling_term(nu: float, n: int, sign: int, alpha: float, w: complex,
                           t_n: complex, u_n: complex) -> complex:
    """alpha^(2n+sign*nu) (t_n T_{2n+sign*nu}(-w/alpha) + u_n U_{2n+sign*nu}(-w/alpha))."""
    order = 2 * n + sign * nu
    arg = -w / alpha
    side = CutSide.PLUS if complex(arg).imag == 0.0 and complex(arg).real <= -1.0 else None
    return alpha**order * (
        t_n * chebyshev_t(order, arg, side) + u_n * chebyshev_u(order, arg, side)
    )


# Jacobi theta functions


def theta_eval(j: int, u: complex, tau: complex, derivative: int = 0) -> complex:
    """Jacobi theta_j(u | tau) by its q-series, optionally differentiated in u."""
    tau = complex(tau)
    if tau.imag <= 0.0:
        raise ValidationError(f"Im tau must be positive, got {tau}")
    if j not in (1, 2, 3, 4):
        raise ValidationError(f"theta index {j} not in 1..4")
    u = complex(u)
    tol = settings.THETA_TOL
    # terms may grow before they decay when Im u is large
    peak = abs(u.imag) / (math.pi * tau.imag) + 1.0

    def trig(kind: str, a: float) -> complex:
        shift = derivative * math.pi / 2.0
        fn = cmath.sin if kind == "sin" else cmath.cos
        return a**derivative * fn(a * u + shift)

    if j in (3, 4):
        total = 1.0 + 0.0j if derivative == 0 else 0.0j
        start = 1
    else:
        total = 0.0j
        start = 0

    for n in range(start, settings.THETA_MAX_TERMS + start):
        if j == 1:
            term = 2.0 * (-1) ** n * cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2) * trig("sin", 2 * n + 1)
        elif j == 2:
            term = 2.0 * cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2) * trig("cos", 2 * n + 1)
        elif j == 3:
            term = 2.0 * cmath.exp(1j * math.pi * tau * n * n) * trig("cos", 2 * n)
        else:
            term = 2.0 * (-1) ** n * cmath.exp(1j * math.pi * tau * n * n) * trig("cos", 2 * n)
        total += term
        if n > peak and (abs(term) <= tol * abs(total) or abs(term) < 1e-300):
            return complex(total)
    raise ThetaConvergenceError(
        f"theta_{j} series not converged in {settings.THETA_MAX_TERMS} terms (tau={tau}, u={u})"
    )


def jacobi_sn(u: complex, k: float) -> complex:
    """Jacobi sn(u | k) from theta quotients."""
    torus = torus_from_modulus(k)
    th3 = theta_eval(3, 0.0, torus.tau)
    th2 = theta_eval(2, 0.0, torus.tau)
    z = complex(u) / th3**2
    return th3 / th2 * theta_eval(1, z, torus.tau) / theta_eval(4, z, torus.tau)


# Band to torus


def _complete_k(k: float) -> float:
    value, _ = integrate.quad(
        lambda s: 1.0 / math.sqrt(1.0 - (k * math.sin(s)) ** 2), 0.0, math.pi / 2.0, limit=200
    )
    return value


def _complete_kprime(k: float) -> float:
    # t = tan(s) turns the half-line integral into a finite one
    value, _ = integrate.quad(
        lambda s: 1.0 / math.sqrt(math.cos(s) ** 2 + (k * math.sin(s)) ** 2),
        0.0,
        math.pi / 2.0,
        limit=400,
    )
    return value


def torus_from_band(alpha: float, beta: float) -> TorusParam:
    """K, K' and tau = i K'/K for the band [alpha, beta]."""
    if not alpha > 0.0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    if not beta > alpha:
        raise ValidationError(f"beta={beta} must exceed alpha={alpha}")
    k = alpha / beta
    K = _complete_k(k)
    Kp = _complete_kprime(k)
    logger.debug(f"torus_from_band: k={k:.6g} K={K:.12g} K'={Kp:.12g}")
    return TorusParam(alpha=alpha, beta=beta, tau=1j * Kp / K, K=K, Kprime=Kp)


def torus_from_modulus(k: float) -> TorusParam:
    return torus_from_band(k, 1.0)


def kprime_reference(k: float) -> float:
    """Complementary integral K(sqrt(1 - k^2)); equals K' as printed."""
    return float(special.ellipk(1.0 - k * k))


def w_of_sigma(torus: TorusParam, sigma: complex) -> complex:
    """w(sigma) = sqrt(alpha beta) theta_2(pi sigma) / theta_3(pi sigma)."""
    u = math.pi * complex(sigma)
    return (
        math.sqrt(torus.alpha * torus.beta)
        * theta_eval(2, u, torus.tau)
        / theta_eval(3, u, torus.tau)
    )


def w_of_sigma_sn(torus: TorusParam, sigma: float) -> float:
    """alpha sn(2 K sigma + K | alpha/beta) for real sigma."""
    sn, _, _, _ = special.ellipj(2.0 * torus.K * sigma + torus.K, torus.modulus**2)
    return torus.alpha * float(sn)


# Quasi-periodic kernel


def g_kernel(sigma: complex, nu: float, tau: complex) -> complex:
    """Kernel with unit residue at 0, period tau, and g(sigma+1) = e^{i pi nu} g(sigma)."""
    sigma = complex(sigma)
    tau = complex(tau)
    # lattice test: sigma = m + n tau
    n_im = sigma.imag / tau.imag
    m_re = sigma.real - n_im * tau.real
    if abs(n_im - round(n_im)) < 1e-12 and abs(m_re - round(m_re)) < 1e-12:
        raise ValidationError(f"sigma={sigma} is a lattice point")
    shift = math.pi * nu * tau / 2.0
    dth1 = math.pi * theta_eval(1, 0.0, tau, derivative=1)
    return (
        dth1
        / theta_eval(1, shift, tau)
        * theta_eval(1, math.pi * sigma + shift, tau)
        / theta_eval(1, math.pi * sigma, tau)
        * np.exp(1j * math.pi * nu * sigma)
    )


def contour_residue(fn, center: complex, radius: float = 1e-3, points: int = 64) -> complex:
    """(1/2 pi i) of the contour integral of fn around center (trapezoid rule)."""
    theta = 2.0 * math.pi * np.arange(points) / points
    zs = center + radius * np.exp(1j * theta)
    values = np.array([fn(z) for z in zs])
    return complex(np.mean(values * (zs - center)))


# Airy and Hermite


def _airy_series(x: float) -> float:
    x3 = x**3
    f_term, g_term = 1.0, x
    f_sum, g_sum = f_term, g_term
    for k in range(1, 200):
        f_term *= x3 / ((3 * k - 1) * (3 * k))
        g_term *= x3 / ((3 * k) * (3 * k + 1))
        f_sum += f_term
        g_sum += g_term
        if abs(f_term) + abs(g_term) < 1e-18 * (abs(f_sum) + abs(g_sum)):
            break
    return AI0 * f_sum + AIP0 * g_sum


def _airy_asymptotic(x: float) -> float:
    zeta = 2.0 / 3.0 * abs(x) ** 1.5
    coeffs = [1.0]
    for k in range(1, 30):
        coeffs.append(coeffs[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    if x > 0:
        total, last = 0.0, math.inf
        for k, c in enumerate(coeffs):
            term = (-1) ** k * c / zeta**k
            if abs(term) > last:
                break
            total += term
            last = abs(term)
        return math.exp(-zeta) / (2.0 * math.sqrt(math.pi) * x**0.25) * total
    even, odd = 0.0, 0.0
    last = math.inf
    for k, c in enumerate(coeffs):
        term = c / zeta**k
        if term < 1e-17 or term > last:
            break
        last = term
        if k % 2 == 0:
            even += (-1) ** (k // 2) * term
        else:
            odd += (-1) ** (k // 2) * term
    phase = zeta + math.pi / 4.0
    return (math.sin(phase) * even - math.cos(phase) * odd) / (math.sqrt(math.pi) * abs(x) ** 0.25)


def airy_eval(x: float) -> float:
    """Ai(x): Maclaurin series inside |x| <= AIRY_SWITCH, asymptotics outside."""
    x = float(x)
    if not np.isfinite(x) or abs(x) > settings.AIRY_MAX_ABS:
        raise NumericalError(f"Ai({x}) outside the supported range")
    if abs(x) <= settings.AIRY_SWITCH:
        return _airy_series(x)
    return _airy_asymptotic(x)


def hermite_eval(n: int, x: float) -> float:
    """Physicists' Hermite polynomial by the three-term recurrence."""
    if n < 0 or n > settings.HERMITE_MAX:
        raise ValidationError(f"Hermite degree {n} outside 0..{settings.HERMITE_MAX}")
    h_prev, h = 1.0, 2.0 * x
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h
