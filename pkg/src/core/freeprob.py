"""Planar-limit analytics.

Stieltjes transforms, density inversion, R-transforms, free convolution,
the quartic disk function and one-cut resolvents by Zhukovsky parametrization.
Variance conventions: the Gaussian weight exp(-N t2 tr X^2 / 2) has semicircle
support [-2/sqrt(t2), 2/sqrt(t2)].
"""

import logging
import math
from fractions import Fraction
from typing import Callable, List, Sequence, Tuple, Union

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate, optimize

from src.config import settings
from src.core.errors import NumericalError, SeriesError, ValidationError
from src.core.models import SpectralDensity, TruncatedSeries

logger = logging.getLogger(__name__)

Evaluator = Callable[[complex], complex]


# Closed-form densities


def semicircle_density(t2: float = 1.0) -> SpectralDensity:
    """Wigner semicircle of variance 1/t2."""
    if t2 <= 0:
        raise ValidationError(f"t2 must be positive, got {t2}")
    r2 = 4.0 / t2
    edge = math.sqrt(r2)
    return SpectralDensity(
        support=(-edge, edge),
        evaluate=lambda x: t2 / (2.0 * math.pi) * np.sqrt(np.maximum(r2 - np.asarray(x) ** 2, 0.0)),
        label=f"semicircle(t2={t2})",
    )


def semicircle_resolvent(t2: float, z: complex) -> complex:
    z = complex(z)
    r = math.sqrt(4.0 / t2)
    return t2 * (z - np.sqrt(z - r) * np.sqrt(z + r)) / 2.0


def _quartic_constants(t2: float, t4: float) -> Tuple[float, float]:
    disc = t2 * t2 + 12.0 * t4
    if disc < 0:
        raise ValidationError(f"t2^2 + 12 t4 = {disc} < 0: outside the single-cut regime")
    root = math.sqrt(disc)
    if t4 == 0.0:
        return t2, 4.0 / t2
    zc2 = 2.0 * (root - t2) / (3.0 * t4)
    if zc2 <= 0:
        raise ValidationError(f"z_c^2 = {zc2} is not positive for (t2={t2}, t4={t4})")
    return (2.0 * t2 + root) / 3.0, zc2


def quartic_edge_squared(t2: float, t4: float) -> float:
    return _quartic_constants(t2, t4)[1]


def quartic_disk(t2: float, t4: float, z: complex) -> complex:
    """Disk function of the even quartic potential t2 x^2/2 + t4 x^4/4."""
    p0, zc2 = _quartic_constants(t2, t4)
    z = complex(z)
    zc = math.sqrt(zc2)
    if abs(z.imag) < 1e-15 and abs(z.real) <= zc:
        raise ValidationError(f"z={z} lies on the cut [-{zc}, {zc}]")
    poly = t4 * z * z + p0
    return complex((t4 * z**3 + t2 * z - poly * np.sqrt(z - zc) * np.sqrt(z + zc)) / 2.0)


def quartic_density(t2: float, t4: float) -> SpectralDensity:
    p0, zc2 = _quartic_constants(t2, t4)
    zc = math.sqrt(zc2)
    return SpectralDensity(
        support=(-zc, zc),
        evaluate=lambda x: (t4 * np.asarray(x) ** 2 + p0)
        * np.sqrt(np.maximum(zc2 - np.asarray(x) ** 2, 0.0))
        / (2.0 * math.pi),
        label=f"quartic(t2={t2}, t4={t4})",
    )


# Transforms


def stieltjes_of_density(rho: SpectralDensity, z: complex) -> complex:
    """W(z) = integral rho(x) / (z - x) dx."""
    z = complex(z)
    a, b = rho.support
    if abs(z.imag) < 1e-12 and a - 1e-12 <= z.real <= b + 1e-12:
        raise ValidationError(f"z={z} is on the support [{a}, {b}]")
    half = (b - a) / 2.0

    # x = a + (b - a)(1 - cos s)/2 absorbs square-root edges
    def integrand(s: float) -> complex:
        x = a + half * (1.0 - math.cos(s))
        return rho(x) * half * math.sin(s) / (z - x)

    re, _ = integrate.quad(lambda s: integrand(s).real, 0.0, math.pi, limit=400, epsabs=1e-14)
    im, _ = integrate.quad(lambda s: integrand(s).imag, 0.0, math.pi, limit=400, epsabs=1e-14)
    return complex(re, im)


def density_mass(rho: SpectralDensity) -> float:
    a, b = rho.support
    half = (b - a) / 2.0
    value, _ = integrate.quad(
        lambda s: rho(a + half * (1.0 - math.cos(s))) * half * math.sin(s), 0.0, math.pi, limit=400
    )
    return value


def density_moment(rho: SpectralDensity, k: int) -> float:
    a, b = rho.support
    half = (b - a) / 2.0

    def integrand(s: float) -> float:
        x = a + half * (1.0 - math.cos(s))
        return x**k * rho(x) * half * math.sin(s)

    value, _ = integrate.quad(integrand, 0.0, math.pi, limit=400, epsabs=1e-14)
    return value


def density_from_stieltjes(W: Evaluator, x: float) -> float:
    """rho(x) = -Im W(x + i0)/pi, extrapolated linearly from two offsets."""
    eps1, eps2 = settings.richardson_eps[:2]
    v1 = -complex(W(complex(x, eps1))).imag / math.pi
    v2 = -complex(W(complex(x, eps2))).imag / math.pi
    value = (eps1 * v2 - eps2 * v1) / (eps1 - eps2)
    if not np.isfinite(value):
        raise SeriesError(f"density extrapolation at x={x} is not finite")
    return float(value)


def l1_distance(f: Callable, g: Callable, a: float, b: float, points: int = 2001) -> float:
    """Trapezoid L1 distance between two densities on [a, b]."""
    xs = np.linspace(a, b, points)
    fv = np.array([float(f(x)) for x in xs])
    gv = np.array([float(g(x)) for x in xs])
    return float(integrate.trapezoid(np.abs(fv - gv), xs))


# Truncated series arithmetic (generic coefficients: Fraction, int or float)


def _mul(a: Sequence, b: Sequence, n: int) -> List:
    out = [0] * n
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: n - i]):
            out[i + j] += ai * bj
    return out


def _inv(a: Sequence, n: int) -> List:
    if a[0] == 0:
        raise SeriesError("series head vanishes; not invertible")
    out = [0] * n
    one = Fraction(1) if isinstance(a[0], (int, Fraction)) else 1.0
    out[0] = one / a[0]
    for k in range(1, n):
        acc = 0
        for j in range(1, min(k, len(a) - 1) + 1):
            acc += a[j] * out[k - j]
        out[k] = -acc / a[0]
    return out


def _compose(f: Sequence, g: Sequence, n: int) -> List:
    """f(g(w)) for g without constant term."""
    out = [0] * n
    power = [1] + [0] * (n - 1)
    for coeff in f[:n]:
        if coeff != 0:
            out = [o + coeff * p for o, p in zip(out, power)]
        power = _mul(power, g, n)
    return out


def point_mass_moments(a, order: int) -> TruncatedSeries:
    return TruncatedSeries(coefficients=[a**k for k in range(order)], truncation_order=order)


def semicircle_moments(variance, order: int) -> TruncatedSeries:
    """Catalan moments m_{2k} = C_k variance^k."""
    coeffs = []
    for k in range(order):
        if k % 2:
            coeffs.append(0)
        else:
            h = k // 2
            coeffs.append(math.comb(2 * h, h) // (h + 1) * variance**h)
    return TruncatedSeries(coefficients=coeffs, truncation_order=order)


def r_transform_series(moments: TruncatedSeries) -> TruncatedSeries:
    """Free cumulant series R(w) = K(w) - 1/w by reversion of W(z) = sum m_k z^(-k-1)."""
    m = list(moments.coefficients)
    if not m or m[0] != 1:
        raise SeriesError(f"moment series must start with m_0 = 1, got {m[:1]}")
    n = len(m)
    if n < 2:
        raise SeriesError("need at least m_0 and m_1")
    # u(w) with w = u M(u), solved by u = w / M(u)
    inv_m = _inv(m, n)
    u = [0, 1] + [0] * (n - 1)
    for _ in range(n + 1):
        u = [0] + _compose(inv_m, u, n)
    # 1/u = (1/w)(1 + a_1 w + ...)^(-1)
    tail = _inv(u[1 : n + 1], n)
    coeffs = tail[1:n]
    return TruncatedSeries(coefficients=coeffs, truncation_order=max(n - 1, 1))


def moments_from_r_transform(r: TruncatedSeries, order: int) -> TruncatedSeries:
    """Inverse construction: moments of the law whose R-transform is r."""
    rc = list(r.coefficients)
    n = order
    # W = u / (1 - u R(W)) in u = 1/z, iterated order by order
    w = [0, 1] + [0] * (n - 1)
    for _ in range(n + 1):
        rw = _compose(rc + [0] * n, w, n + 1)
        denom = [1] + [0] * n
        ur = [0] + rw[:n]
        denom = [d - x for d, x in zip(denom, ur)]
        w = [0] + _inv(denom, n + 1)[:n]
    return TruncatedSeries(coefficients=w[1 : n + 1], truncation_order=n)


def moments_of(source: Union[SpectralDensity, TruncatedSeries], order: int) -> TruncatedSeries:
    if isinstance(source, TruncatedSeries):
        return TruncatedSeries(
            coefficients=list(source.coefficients[:order]), truncation_order=order
        )
    coeffs = [1.0] + [density_moment(source, k) for k in range(1, order)]
    mass = density_mass(source)
    if abs(mass - 1.0) > 1e-6:
        raise ValidationError(f"density mass {mass} differs from 1")
    return TruncatedSeries(coefficients=coeffs, truncation_order=order)


def _series_value(coeffs: Sequence, w: complex) -> complex:
    return complex(npoly.polyval(w, np.array([complex(c) for c in coeffs])))


def _series_deriv(coeffs: Sequence, w: complex) -> complex:
    c = np.array([complex(x) for x in coeffs])
    return complex(npoly.polyval(w, npoly.polyder(c))) if len(c) > 1 else 0j


def resolvent_from_r(r: TruncatedSeries, z: complex, start: complex | None = None) -> complex:
    """Solve z = 1/W + R(W) by damped Newton continued down from far above the axis.

    Near a square-root edge the root is nearly double, so convergence is judged
    on the residual |K(W) - z| rather than on the step.
    """
    coeffs = list(r.coefficients)
    z = complex(z)
    scale = 10.0 + abs(z)
    path = [complex(z.real, z.imag + scale * f) for f in (1.0, 0.5, 0.25, 0.1, 0.03, 0.01, 0.003, 0.001)]
    path.append(z)

    def residual(w: complex, target: complex) -> complex:
        return 1.0 / w + _series_value(coeffs, w) - target

    wv = start if start is not None else 1.0 / path[0]
    for target in path:
        tol = 1e-13 * max(1.0, abs(target))
        f = residual(wv, target)
        for _ in range(200):
            if abs(f) <= tol:
                break
            df = -1.0 / wv**2 + _series_deriv(coeffs, wv)
            if df == 0:
                raise SeriesError(f"K'(w) vanishes at w={wv} while inverting at z={target}")
            step = f / df
            damping = 1.0
            while True:
                candidate = wv - damping * step
                fc = residual(candidate, target)
                if abs(fc) < abs(f) or damping < 1e-6:
                    break
                damping *= 0.5
            if abs(fc) >= abs(f):
                break
            wv, f = candidate, fc
        if abs(f) > 1e-9 * max(1.0, abs(target)):
            raise SeriesError(f"inverse of K(w) = z did not converge at z={target} (residual {abs(f):.2e})")
    if z.imag > 0.0 and wv.imag > 1e-9 * max(1.0, abs(wv)):
        raise SeriesError(f"inverse of K(w) = z left the physical sheet at z={z}")
    return wv


def free_sum_inverse(inverses: Sequence[Callable[[complex], complex]], w: complex) -> complex:
    """Functional inverse of the free sum: sum_i K_i(w) - (q - 1)/w."""
    q = len(inverses)
    return sum(k(w) for k in inverses) - (q - 1) / w


def free_convolve(
    rhoX: Union[SpectralDensity, TruncatedSeries],
    rhoY: Union[SpectralDensity, TruncatedSeries],
    order: int | None = None,
) -> SpectralDensity:
    """rhoX boxplus rhoY via added R-series, re-densified on a grid."""
    order = order or settings.FREE_CONV_ORDER
    rx = r_transform_series(moments_of(rhoX, order + 1))
    ry = r_transform_series(moments_of(rhoY, order + 1))
    n = max(len(rx.coefficients), len(ry.coefficients))
    pad = lambda c: list(c) + [0] * (n - len(c))  # noqa: E731
    summed = [a + b for a, b in zip(pad(rx.coefficients), pad(ry.coefficients))]
    r = TruncatedSeries(coefficients=summed, truncation_order=n)

    mean = float(summed[0])
    var = float(summed[1]) if n > 1 else 0.0
    if var <= 0.0:
        raise SeriesError("free sum has no spread; density not defined")
    half_width = 3.0 * math.sqrt(var)
    xs = np.linspace(mean - half_width, mean + half_width, settings.DENSITY_GRID)
    values = np.array([max(density_from_stieltjes(lambda z: resolvent_from_r(r, z), x), 0.0)
                       for x in xs])
    values[values < 1e-9] = 0.0
    nz = np.nonzero(values)[0]
    if len(nz) < 3:
        raise SeriesError("re-densified free convolution is empty")
    lo, hi = nz[0], nz[-1]
    a = xs[max(lo - 1, 0)]
    b = xs[min(hi + 1, len(xs) - 1)]
    mass = float(integrate.trapezoid(values, xs))
    grid, dens = xs.copy(), values / mass
    logger.info(f"free_convolve: support [{a:.4f}, {b:.4f}], mass before normalization {mass:.6f}")
    return SpectralDensity(
        support=(a, b),
        evaluate=lambda x: np.interp(x, grid, dens),
        label="free_convolution",
    )


# Moments from contour integrals


def moments_of_disk(W: Evaluator, j: int, contour_radius: float, points: int = 512) -> float:
    """(1/2 pi i) contour integral of z^j W(z) dz on a circle (trapezoid rule)."""

    def integral(radius: float) -> complex:
        theta = 2.0 * math.pi * np.arange(points) / points
        zs = radius * np.exp(1j * theta)
        return complex(np.mean([z ** (j + 1) * W(z) for z in zs]))

    value = integral(contour_radius)
    check = integral(contour_radius * 1.1)
    if abs(value - check) > 1e-6 * max(1.0, abs(value)):
        raise NumericalError(f"moment {j} unstable under radius change: {value} vs {check}")
    if abs(value.imag) > 1e-8:
        raise NumericalError(f"moment {j} has imaginary part {value.imag}")
    return value.real


# Scaling limit of the quartic disk


def scaling_expand_quartic(epsilon: float, mu: float, muB: float) -> TruncatedSeries:
    """Coefficients of 1, eps, eps^(3/2) of W at t4 = -(1 - eps^2 mu)/12, z = sqrt(8)(1 + eps muB/2)."""
    if not 0.0 < epsilon <= 0.1:
        raise ValidationError(f"epsilon={epsilon} outside (0, 0.1]")
    if mu <= 0 or muB <= -math.sqrt(mu):
        raise ValidationError("need mu > 0 and muB > -sqrt(mu)")
    with mpmath.workdps(50):
        mu_m, muB_m = mpmath.mpf(mu), mpmath.mpf(muB)
        zc = mpmath.sqrt(8)

        def w_at(eps):
            t2 = mpmath.mpf(1)
            t4 = -(1 - eps**2 * mu_m) / 12
            root = mpmath.sqrt(t2**2 + 12 * t4)
            zc2 = 2 * (root - t2) / (3 * t4)
            z = zc * (1 + eps * muB_m / 2)
            poly = t4 * z**2 + (2 * t2 + root) / 3
            return (t4 * z**3 + t2 * z - poly * mpmath.sqrt(z**2 - zc2)) / 2

        # samples well inside the expansion so the eps^(9/2) tail stays below 1e-16
        exponents = [0, 1, 1.5, 2, 2.5, 3, 3.5, 4]
        eps_list = [mpmath.mpf(epsilon) / 2**k for k in range(8, 20)]
        A = mpmath.matrix([[e ** mpmath.mpf(p) for p in exponents] for e in eps_list])
        b = mpmath.matrix([w_at(e) for e in eps_list])
        sol = mpmath.qr_solve(A, b)[0]
        residual = max(abs(x) for x in (A * sol - b))
        if residual > 1e-12 * max(abs(x) for x in b):
            logger.error(f"scaling fit residual {residual}")
            raise NumericalError(f"scaling fit residual {float(residual):.3e} too large")
        c0, c1, c32 = (float(sol[0]), float(sol[1]), float(sol[2]))
    return TruncatedSeries(
        exponent_step=Fraction(1, 2),
        coefficients=[c0, 0.0, c1, c32],
        truncation_order=2,
    )


def quartic_dimensionless(series: TruncatedSeries, mu: float, muB: float) -> Tuple[float, float]:
    """(zeta, Q) with zeta = muB/sqrt(mu) and Q from the eps^(3/2) coefficient; T3(zeta) = T2(Q)."""
    c32 = float(series.coefficient(Fraction(3, 2)))
    return muB / math.sqrt(mu), 3.0 * c32 / (2.0 * mu**0.75)


# One-cut solutions


class OneCutSolution:
    """Zhukovsky parametrization x(s) = gamma s + alpha0 + gamma/s of a one-cut resolvent.

    The potential derivative V'(x) = sum_k c_k x^k is given by its coefficients
    (c_0 first). W(x(s)) is the negative-power part of V'(x(s)) for |s| > 1.
    """

    def __init__(self, vprime: Sequence[float], gamma: float, alpha0: float):
        self.vprime = [float(c) for c in vprime]
        self.gamma = gamma
        self.alpha0 = alpha0
        self.laurent = self._laurent(gamma, alpha0)

    def _laurent(self, gamma: float, alpha0: float) -> dict:
        degree = len(self.vprime) - 1
        base = np.array([gamma, alpha0, gamma])  # s * x(s), ascending powers
        total = np.zeros(2 * degree + 1)
        for k, c in enumerate(self.vprime):
            if c == 0.0:
                continue
            term = npoly.polypow(base, k) if k else np.array([1.0])
            # x^k = term / s^k; shift by s^(degree - k)
            padded = np.zeros(2 * degree + 1)
            start = degree - k
            padded[start : start + len(term)] += c * term
            total += padded
        return {j - degree: total[j] for j in range(len(total))}

    @property
    def support(self) -> Tuple[float, float]:
        return (self.alpha0 - 2.0 * abs(self.gamma), self.alpha0 + 2.0 * abs(self.gamma))

    def x_of_s(self, s: complex) -> complex:
        return self.gamma * s + self.alpha0 + self.gamma / s

    def s_of_x(self, x: complex) -> complex:
        roots = np.roots([self.gamma, self.alpha0 - complex(x), self.gamma])
        return complex(max(roots, key=abs))

    def resolvent_s(self, s: complex) -> complex:
        return sum(a * s**k for k, a in self.laurent.items() if k < 0)

    def resolvent(self, x: complex) -> complex:
        s = self.s_of_x(x)
        return sum(a * s**k for k, a in self.laurent.items() if k < 0)

    def density(self) -> SpectralDensity:
        a, b = self.support
        return SpectralDensity(
            support=(a, b),
            evaluate=np.vectorize(lambda x: density_from_stieltjes(self.resolvent, x)),
            label="one_cut",
        )


def one_cut_solve(vprime: Sequence[float], seed: Tuple[float, float] | None = None) -> OneCutSolution:
    """Solve [V'(x(s))]_0 = 0 and [V'(x(s))]_{-1} = 1/gamma for (gamma, alpha0)."""
    vprime = [float(c) for c in vprime]
    if len(vprime) < 2 or vprime[1] <= 0.0:
        raise ValidationError("V'(x) needs a positive linear coefficient")
    g0, a0 = seed if seed is not None else (1.0 / math.sqrt(vprime[1]), 0.0)

    def equations(v):
        gamma, alpha0 = v
        sol = OneCutSolution(vprime, gamma, alpha0)
        return [sol.laurent.get(0, 0.0), sol.laurent.get(-1, 0.0) - 1.0 / gamma]

    root, info, ier, msg = optimize.fsolve(equations, [g0, a0], full_output=True, xtol=1e-14)
    if max(abs(x) for x in info["fvec"]) > 1e-10:
        raise NumericalError(f"one-cut equations did not converge: {msg}")
    sol = OneCutSolution(vprime, float(root[0]), float(root[1]))
    logger.debug(f"one_cut_solve: gamma={sol.gamma:.12g} alpha0={sol.alpha0:.12g}")
    return sol


def subordinate_with_semicircle(W: Evaluator, z: complex, variance: float = 1.0) -> complex:
    """W_Y(z) = W(z - variance * W_Y(z)) for Y = X + semicircle(variance), X free."""
    z = complex(z)
    wy = 1.0 / z
    for _ in range(500):
        new = W(z - variance * wy)
        if abs(new - wy) < 1e-14 * max(1.0, abs(new)):
            return new
        wy = 0.5 * wy + 0.5 * new
    raise NumericalError(f"subordination did not converge at z={z}")
