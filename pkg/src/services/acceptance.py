"""Acceptance suite: one check per criterion, each reporting pass/fail and the measured value."""

import logging
import math
import time
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
import sympy
from pydantic import BaseModel

from src.config import settings
from src.core.dsl import (
    DEFAULT_RING,
    airy_residual,
    chebyshev_background,
    companion_matrices,
    lax_pair,
    painleve_constraint,
    string_relations,
    string_residual,
)
from src.core.errors import RandsurfError, ValidationError
from src.core.freeprob import (
    free_convolve,
    l1_distance,
    point_mass_moments,
    quartic_dimensionless,
    quartic_edge_squared,
    scaling_expand_quartic,
    semicircle_density,
)
from src.core.maps import growth_fit, rooted_count, tutte_formula, wick_enumerate
from src.core.polynomials import X, Y
from src.core.potts_curves import (
    EllipticResolvent,
    critical_points,
    curve_samples,
    curve_template,
    dual_inverse_residual,
    elliptic_WY,
    fix_constants,
    kpz,
    nu_gamma,
    scaling_coefficient,
)
from src.core.wronskian import (
    additive_compound,
    bdry_entropy_check,
    char_polys,
    kac_branch_check,
    lax_matrices,
    semiclassical_factor,
    spectral_duality_check,
)
from src.services.ensembles import empirical_l1, gaussian_sample

logger = logging.getLogger(__name__)


class AcceptanceResult(BaseModel):
    """Outcome of one acceptance criterion."""

    criterion: int
    name: str
    passed: bool
    measured: Optional[float] = None
    threshold: str
    seconds: float = 0.0
    detail: str = ""


class AcceptanceOptions(BaseModel):
    """Knobs for the stochastic criteria."""

    N: int = 512
    draws: int = 100
    seed: int = 0


def _zero(matrix) -> bool:
    return matrix.applyfunc(sympy.expand) == sympy.zeros(matrix.rows, matrix.cols)


# Random matrices and maps


def check_semicircle(opts: AcceptanceOptions) -> AcceptanceResult:
    batch = gaussian_sample(opts.N, opts.draws, (1.0,), seed=opts.seed)
    l1 = empirical_l1(batch, "X1", semicircle_density(1.0))
    return AcceptanceResult(criterion=1, name="semicircle law", passed=l1 < 0.05,
                            measured=l1, threshold="L1 < 0.05")


def check_tutte(opts: AcceptanceOptions) -> AcceptanceResult:
    mismatches = 0
    counts = []
    for n in (1, 2, 3):
        planar = [e for e in wick_enumerate((4,) * n) if e.genus == 0]
        rooted = sum((rooted_count(e) for e in planar), Fraction(0))
        counts.append(rooted)
        if rooted != tutte_formula(n):
            mismatches += 1
    return AcceptanceResult(criterion=2, name="Tutte counts", passed=mismatches == 0,
                            measured=float(mismatches), threshold="0 mismatches",
                            detail=f"rooted planar counts {[str(c) for c in counts]}")


def check_growth(opts: AcceptanceOptions) -> AcceptanceResult:
    base, exponent = growth_fit([tutte_formula(n) for n in range(1, 21)])
    ok = abs(base - 12.0) <= 0.5 and abs(exponent + 2.5) <= 0.2
    return AcceptanceResult(criterion=3, name="Tutte growth", passed=ok, measured=base,
                            threshold="base 12 +- 0.5, exponent -2.5 +- 0.2",
                            detail=f"exponent {exponent:.4f}")


def check_quartic(opts: AcceptanceOptions) -> AcceptanceResult:
    edge_err = abs(quartic_edge_squared(1.0, -1.0 / 12.0) - 8.0)
    mu, muB = 1.0, 0.5
    series = scaling_expand_quartic(0.05, mu, muB)
    expected = {
        Fraction(0): math.sqrt(2) / 3,
        Fraction(1): -muB / math.sqrt(2),
        Fraction(3, 2): math.sqrt(2) / 3 * (2 * muB - math.sqrt(mu)) * math.sqrt(muB + math.sqrt(mu)),
    }
    coef_err = max(abs(float(series.coefficient(k)) - v) for k, v in expected.items())
    cheb_err = 0.0
    for b in np.linspace(-0.9, 2.0, 50):
        zeta, Q = quartic_dimensionless(scaling_expand_quartic(0.05, mu, float(b)), mu, float(b))
        cheb_err = max(cheb_err, abs((4 * zeta**3 - 3 * zeta) - (2 * Q**2 - 1)))
    ok = edge_err < 1e-12 and coef_err < 1e-8 and cheb_err < 1e-6
    return AcceptanceResult(criterion=4, name="quartic criticality", passed=ok,
                            measured=max(coef_err, cheb_err),
                            threshold="edge 1e-12, coefficients 1e-8, T3(zeta)-T2(Q) 1e-6",
                            detail=f"edge {edge_err:.2e} coefficients {coef_err:.2e} chebyshev {cheb_err:.2e}")


def check_free_convolution(opts: AcceptanceOptions) -> AcceptanceResult:
    rho = free_convolve(semicircle_density(1.0), semicircle_density(1.0))
    batch = gaussian_sample(opts.N, opts.draws, (1.0, 1.0), seed=opts.seed + 1)
    l1 = empirical_l1(batch, "S2", rho)

    shift = 0.5
    shifted = free_convolve(point_mass_moments(shift, settings.FREE_CONV_ORDER + 1), semicircle_density(1.0))
    shift_err = l1_distance(lambda x: shifted(np.asarray(x) + shift), semicircle_density(1.0), -2.0, 2.0)
    ok = l1 < 0.05 and shift_err < 0.01
    return AcceptanceResult(criterion=5, name="free convolution", passed=ok, measured=l1,
                            threshold="L1 < 0.05, shift 0.01",
                            detail=f"point-mass shift L1 {shift_err:.2e}")


# Potts chains


def check_critical_points(opts: AcceptanceOptions) -> AcceptanceResult:
    closed = {
        1: (1 + 2 * math.sqrt(3), math.sqrt(2)),
        2: (2 + 2 * math.sqrt(7), math.sqrt(10)),
        3: (3 + math.sqrt(47), math.sqrt(105) / 2),
    }
    err = 0.0
    for q, (t2c, t3c) in closed.items():
        cp = critical_points(q)
        err = max(err, abs(cp.t2c - t2c), abs(cp.t3c - t3c))
    return AcceptanceResult(criterion=6, name="critical points", passed=err < 1e-8,
                            measured=err, threshold="1e-8")


def check_exponents(opts: AcceptanceOptions) -> AcceptanceResult:
    expected = {1: Fraction(-1, 2), 2: Fraction(-1, 3), 3: Fraction(-1, 5), 4: Fraction(0)}
    charges = {1: 0.0, 2: 0.5, 3: 0.8, 4: 1.0}
    misses = 0
    err = 0.0
    for q, gamma in expected.items():
        _, got = nu_gamma(q)
        if Fraction(got).limit_denominator(100) != gamma:
            misses += 1
        err = max(err, abs(kpz(charges[q]) - got))
    ok = misses == 0 and err < 1e-12
    return AcceptanceResult(criterion=7, name="string exponents", passed=ok, measured=err,
                            threshold="exact fractions, kpz 1e-12", detail=f"{misses} fraction mismatches")


def check_elliptic(opts: AcceptanceOptions) -> AcceptanceResult:
    fixed = fix_constants(curve_template(2, 1, 1), 2, 1, 4.0, 0.2)
    xs, ys = curve_samples(2, 1, 1, 4.0, 0.2, count=7, source="elliptic")
    residual = fixed.relative_residual(xs[:20], ys[:20])
    return AcceptanceResult(criterion=8, name="elliptic vs Ising curve", passed=residual < 1e-6,
                            measured=residual, threshold="1e-6", detail=f"{min(len(xs), 20)} points")


def _upper_grid() -> List[complex]:
    angles = np.linspace(0.15 * math.pi, 0.85 * math.pi, 10)
    return [r * complex(math.cos(a), math.sin(a)) for r in (3.0, 4.0) for a in angles]


def check_dual_relation(opts: AcceptanceOptions) -> AcceptanceResult:
    worst = {}
    for q, (t2, t3) in {2: (4.0, 0.2), 3: (6.0, 0.2)}.items():
        worst[q] = dual_inverse_residual(EllipticResolvent(elliptic_WY(q, t2, t3)), 1, _upper_grid())
    measured = max(worst.values())
    return AcceptanceResult(criterion=9, name="dual relation", passed=measured < 1e-8,
                            measured=measured, threshold="1e-8",
                            detail=", ".join(f"q={q}: {v:.2e}" for q, v in worst.items()))


def check_scaling(opts: AcceptanceOptions) -> AcceptanceResult:
    err = 0.0
    for q in (1, 2):
        fit = scaling_coefficient(q)
        err = max(err, abs(fit.exponent - fit.expected_exponent))
    return AcceptanceResult(criterion=10, name="scaling exponent", passed=err <= 0.02,
                            measured=err, threshold="0.02")


# Differential operators and Wronskians


def check_airy(opts: AcceptanceOptions) -> AcceptanceResult:
    grid = np.linspace(-1.0, 1.0, 41)
    worst = max(airy_residual(1.0, grid, zeta) for zeta in (0.0, 0.5, 1.0))
    return AcceptanceResult(criterion=11, name="Airy wave function", passed=worst < 1e-6,
                            measured=worst, threshold="1e-6")


def check_string_equations(opts: AcceptanceOptions) -> AcceptanceResult:
    t = DEFAULT_RING.t
    airy_ok = string_residual(2, 1, {"u2": -t}).vanishes and not string_residual(2, 1, {"u2": -2 * t}).vanishes
    counts = {}
    for pair in ((3, 2), (4, 3)):
        counts[pair] = len(string_residual(*pair, string_relations(*pair)).constraints)
    v2 = DEFAULT_RING.v(2)
    constraint = painleve_constraint()
    fields = (v2, DEFAULT_RING.D(v2), DEFAULT_RING.D(v2, 3))
    nonlinear = sympy.Poly(constraint, *fields).total_degree() > 1
    ok = airy_ok and nonlinear and all(0 < c < 10 for c in counts.values())
    return AcceptanceResult(criterion=12, name="string equations", passed=ok,
                            measured=float(sum(counts.values())), threshold="finite constraint sets",
                            detail=f"constraints {counts}; (3,2): {constraint} = 0")


def check_lax_goldens(opts: AcceptanceOptions) -> AcceptanceResult:
    R = DEFAULT_RING
    g, zeta = R.gs, R.zeta
    u2, u3, v2 = R.u(2), R.u(3), R.v(2)
    checks: Dict[str, bool] = {}

    B, _ = lax_matrices(3, 2, 2, substitutions={})
    checks["(3,2) B"] = _zero(B - sympy.Matrix([[0, 4, 0], [-u2, 0, 4], [u3 - zeta, 0, 0]]) / 4)
    _, Qm = lax_matrices(3, 2, 2)
    vdot, vddot = g * R.D(v2), g**2 * R.D(v2, 2)
    golden_q = sympy.Matrix(
        [[2 * v2, 0, -8], [-vdot + 2 * zeta, 2 * v2, 0], [-vddot, vdot + 2 * zeta, -4 * v2]]
    ) / 4
    checks["(3,2) Q"] = _zero(Qm - golden_q)

    for p, pprime in ((4, 3), (5, 2)):
        B1, Q1 = companion_matrices(lax_pair(p, pprime).subs(string_relations(p, pprime)))
        B2, Q2 = lax_matrices(p, pprime, 2)
        checks[f"({p},{pprime}) compound"] = _zero(B2 - additive_compound(B1, p, 2)) and _zero(
            Q2 - additive_compound(Q1, p, 2)
        )

    F, _ = char_polys(3, 2, 1)
    expected = Y**3 + sympy.Rational(3, 4) * v2 * Y - X / 4 + sympy.Rational(3, 8) * vdot
    checks["pure gravity curve"] = sympy.expand(F.as_expr() - expected) == 0

    r = sympy.Rational
    ising = {"u2": r(-8, 3), "u3": 0, "u4": 1, "v2": -1, "v3": 0}
    F, _ = char_polys(4, 3, 2, ising)
    expected = Y**6 - r(2, 3) * Y**4 + r(1, 2) * Y**2 * X - r(7, 18) * Y**2
    checks["Ising curve"] = sympy.expand(F.as_expr() - expected) == 0

    failed = [k for k, ok in checks.items() if not ok]
    return AcceptanceResult(criterion=13, name="Lax golden data", passed=not failed,
                            measured=float(len(failed)), threshold="0 mismatches",
                            detail=f"failed: {failed}" if failed else f"{len(checks)} checks")


def check_factorization(opts: AcceptanceOptions) -> AcceptanceResult:
    worst = 0.0
    cases = 0
    for p in range(3, 8):
        for pprime in range(1, 8):
            if math.gcd(p, pprime) != 1:
                continue
            worst = max(worst, semiclassical_factor(p, pprime).residual)
            cases += 1
    return AcceptanceResult(criterion=14, name="Chebyshev factorization", passed=worst < 1e-10,
                            measured=worst, threshold="1e-10", detail=f"{cases} coprime pairs")


def check_kac_branch(opts: AcceptanceOptions) -> AcceptanceResult:
    worst = max(kac_branch_check(5, 2, 2), kac_branch_check(4, 3, 2))
    return AcceptanceResult(criterion=15, name="Kac branch sums", passed=worst < 1e-10,
                            measured=worst, threshold="1e-10")


def check_duality(opts: AcceptanceOptions) -> AcceptanceResult:
    gravity = spectral_duality_check(3, 2, 1)
    ising = spectral_duality_check(4, 3, 2, chebyshev_background(4, 3))
    gravity_ok = gravity.q_power == 0 and gravity.eta_scale == -1 and gravity.constant == sympy.Rational(1, 2)
    ok = gravity_ok and ising.q_power == 2
    return AcceptanceResult(criterion=16, name="spectral duality", passed=ok,
                            measured=float(ising.q_power),
                            threshold="exact: (3,2) eta = -Q, constant 1/2; Q^2 factor for (4,3)",
                            detail=f"(3,2) eta scale {gravity.eta_scale}, constant {gravity.constant}, "
                                   f"Q^{gravity.q_power}; (4,3) eta scale {ising.eta_scale}")


def check_boundary_entropy(opts: AcceptanceOptions) -> AcceptanceResult:
    worst = 0.0
    for p in range(2, 11):
        for pprime in range(2, 11):
            if math.gcd(p, pprime) != 1:
                continue
            for r in range(1, p):
                for s in range(1, pprime):
                    worst = max(worst, bdry_entropy_check(p, pprime, r, s))
    return AcceptanceResult(criterion=17, name="quantum-dimension sums", passed=worst < 1e-12,
                            measured=worst, threshold="1e-12")


CHECKS: Dict[int, Callable[[AcceptanceOptions], AcceptanceResult]] = {
    1: check_semicircle,
    2: check_tutte,
    3: check_growth,
    4: check_quartic,
    5: check_free_convolution,
    6: check_critical_points,
    7: check_exponents,
    8: check_elliptic,
    9: check_dual_relation,
    10: check_scaling,
    11: check_airy,
    12: check_string_equations,
    13: check_lax_goldens,
    14: check_factorization,
    15: check_kac_branch,
    16: check_duality,
    17: check_boundary_entropy,
}


def run_acceptance(
    only: Optional[Iterable[int]] = None, options: Optional[AcceptanceOptions] = None
) -> List[AcceptanceResult]:
    """Run the selected criteria in order; a failing check is reported, not raised."""
    opts = options or AcceptanceOptions()
    selected = sorted(set(only)) if only is not None else sorted(CHECKS)
    unknown = [c for c in selected if c not in CHECKS]
    if unknown:
        raise ValidationError(f"unknown acceptance criteria {unknown}; valid 1..{len(CHECKS)}")

    results = []
    for criterion in selected:
        check = CHECKS[criterion]
        started = time.monotonic()
        try:
            result = check(opts)
        except RandsurfError as e:
            logger.error(f"criterion {criterion} raised {type(e).__name__}: {e}")
            result = AcceptanceResult(criterion=criterion, name=check.__name__, passed=False,
                                      threshold="", detail=str(e))
        except Exception as e:
            logger.exception(f"criterion {criterion} crashed: {e}")
            result = AcceptanceResult(criterion=criterion, name=check.__name__, passed=False,
                                      threshold="", detail=f"{type(e).__name__}: {e}")
        result.seconds = time.monotonic() - started
        status = "PASS" if result.passed else "FAIL"
        measured = "n/a" if result.measured is None else f"{result.measured:.3e}"
        logger.info(f"[{status}] {criterion:2d} {result.name}: {measured} ({result.threshold})")
        results.append(result)
    passed = sum(r.passed for r in results)
    logger.info(f"acceptance: {passed}/{len(results)} passed")
    return results
