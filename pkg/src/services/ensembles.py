"""Monte Carlo sampling of the one-matrix and coupled q-matrix ensembles.

Action: N tr[ sum_i V_i(X_i) - sum_{i<j} X_i X_j ] with V_i(x) = sum_m t_m x^m / m.
Every pair is coupled, so q=3 is the fully connected chain.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.core.errors import EnsembleError, UnstableActionError, ValidationError
from src.core.models import EnsembleConfig, SampleBatch
from src.core.specfun import hermite_eval

logger = logging.getLogger(__name__)

MAX_DEGREE = 4


def _effective_potentials(config: EnsembleConfig) -> Tuple[List[Dict[int, float]], bool]:
    """Potentials as sampled; cubic tails get a quartic regulator."""
    potentials, regularized = [], False
    for i, coeffs in enumerate(config.potential_coeffs):
        coeffs = {m: t for m, t in coeffs.items() if t != 0.0}
        if any(m < 1 or m > MAX_DEGREE for m in coeffs):
            raise EnsembleError(f"matrix {i + 1}: only degrees 1..{MAX_DEGREE} are sampled")
        top, lead = config.leading_even(i)
        if top % 2 == 1:
            coeffs[4] = settings.MC_QUARTIC_REGULATOR
            regularized = True
            logger.warning(
                f"matrix {i + 1}: odd leading degree {top}, adding x^4 tail "
                f"{settings.MC_QUARTIC_REGULATOR}/4"
            )
        elif top == 4 and lead < 0:
            raise EnsembleError(f"matrix {i + 1}: negative quartic coefficient {lead}")
        potentials.append(coeffs)
    return potentials, regularized


def _coupling_pairs(q: int, coupling_on: bool) -> List[Tuple[int, int]]:
    if not coupling_on:
        return []
    return [(i, j) for i in range(q) for j in range(i + 1, q)]


def _check_gaussian_stability(config: EnsembleConfig, potentials: List[Dict[int, float]]):
    """Quadratic form must be positive definite when no matrix has a quartic tail."""
    if any(4 in p for p in potentials):
        return
    form = np.diag([p.get(2, 0.0) for p in potentials])
    for i, j in _coupling_pairs(config.q, config.coupling_on):
        form[i, j] = form[j, i] = -1.0
    smallest = float(np.linalg.eigvalsh(form).min())
    if smallest <= 0.0:
        raise EnsembleError(f"Gaussian action not bounded below (smallest eigenvalue {smallest:.4g})")


def gaussian_sum_variance(q: int, t2: float, p: int, coupling_on: bool = True) -> float:
    """Semicircle variance of X_1 + ... + X_p for identical Gaussian potentials t2 x^2/2."""
    form = np.eye(q) * t2
    for i, j in _coupling_pairs(q, coupling_on):
        form[i, j] = form[j, i] = -1.0
    v = np.zeros(q)
    v[:p] = 1.0
    return float(v @ np.linalg.solve(form, v))


class MetropolisChain:
    """One strictly sequential chain of entrywise Hermitian updates."""

    def __init__(self, config: EnsembleConfig):
        self.config = config
        self.N = config.N
        self.potentials, self.regularized = _effective_potentials(config)
        _check_gaussian_stability(config, self.potentials)
        self.pairs = _coupling_pairs(config.q, config.coupling_on)
        self.neighbours = {
            i: [j for a, b in self.pairs for i2, j in ((a, b), (b, a)) if i2 == i]
            for i in range(config.q)
        }
        self.rng = np.random.default_rng(config.seed)
        self.scale = config.proposal_scale / math.sqrt(self.N)
        self.X = [np.zeros((self.N, self.N), dtype=complex) for _ in range(config.q)]
        self.X2 = [np.zeros((self.N, self.N), dtype=complex) for _ in range(config.q)]
        self.traces = [np.zeros(MAX_DEGREE + 1) for _ in range(config.q)]
        self.accepted = 0
        self.proposed = 0

    @staticmethod
    def _power_traces(X: np.ndarray, X2: np.ndarray) -> np.ndarray:
        return np.array(
            [
                0.0,
                np.trace(X).real,
                np.trace(X2).real,
                np.sum(X2 * X.T).real,
                np.sum(np.abs(X2) ** 2),
            ]
        )

    def _potential(self, i: int, traces: np.ndarray) -> float:
        return sum(t / m * traces[m] for m, t in self.potentials[i].items())

    def action(self) -> float:
        value = sum(self._potential(i, self.traces[i]) for i in range(self.config.q))
        for i, j in self.pairs:
            value -= np.sum(self.X[i] * self.X[j].T).real
        return self.N * value

    def step(self):
        i = int(self.rng.integers(self.config.q))
        a, b = sorted(int(v) for v in self.rng.integers(self.N, size=2))
        if a == b:
            delta = complex(self.rng.normal() * self.scale)
        else:
            delta = complex(self.rng.normal(), self.rng.normal()) * self.scale / math.sqrt(2.0)

        X = self.X[i]
        Xn = X.copy()
        Xn[a, b] += delta
        if a != b:
            Xn[b, a] += delta.conjugate()
        X2n = self.X2[i].copy()
        for r in {a, b}:
            X2n[r, :] = Xn[r, :] @ Xn
            X2n[:, r] = Xn @ Xn[:, r]
        traces = self._power_traces(Xn, X2n)

        d_action = self._potential(i, traces) - self._potential(i, self.traces[i])
        for j in self.neighbours[i]:
            Xj = self.X[j]
            change = delta * Xj[b, a]
            if a != b:
                change += delta.conjugate() * Xj[a, b]
            d_action -= change.real
        d_action *= self.N

        self.proposed += 1
        if d_action <= 0.0 or self.rng.random() < math.exp(-d_action):
            self.X[i], self.X2[i], self.traces[i] = Xn, X2n, traces
            self.accepted += 1

    def sweep(self):
        for _ in range(self.config.q * self.N * (self.N + 1) // 2):
            self.step()

    def _tune(self):
        rate = self.accepted / max(self.proposed, 1)
        if rate < 0.2:
            self.scale *= 0.8
        elif rate > 0.6:
            self.scale *= 1.2
        self.accepted = self.proposed = 0

    def eigenvalues(self) -> Dict[str, List[float]]:
        out = {f"X{i + 1}": np.linalg.eigvalsh(self.X[i]).tolist() for i in range(self.config.q)}
        partial = self.X[0].copy()
        for p in range(2, self.config.q + 1):
            partial = partial + self.X[p - 1]
            out[f"S{p}"] = np.linalg.eigvalsh(partial).tolist()
        return out

    def run(self) -> SampleBatch:
        cfg = self.config
        floor = -1e3 * self.N * self.N
        for k in range(cfg.burn_in):
            self.sweep()
            self._tune()
            energy = self.action()
            if not math.isfinite(energy) or energy < floor:
                raise UnstableActionError(f"action drifted to {energy:.4g} at burn-in sweep {k}")

        draws: Dict[str, List[List[float]]] = {}
        series: List[float] = []
        for k in range(cfg.steps):
            self.sweep()
            if (k + 1) % cfg.thinning:
                continue
            for label, values in self.eigenvalues().items():
                draws.setdefault(label, []).append(values)
            series.append(float(self.traces[0][2]) / self.N)
        rate = self.accepted / max(self.proposed, 1)
        if not 0.2 <= rate <= 0.6:
            logger.warning(f"acceptance {rate:.3f} outside [0.2, 0.6] (seed {cfg.seed})")
        if not draws:
            raise EnsembleError("no measurements: steps shorter than thinning")
        return SampleBatch(
            eigenvalue_draws=draws,
            acceptance_rate=rate,
            effective_samples=effective_sample_size(series),
            N=self.N,
            regularized=self.regularized,
            seed=cfg.seed,
        )


def effective_sample_size(series: Sequence[float]) -> int:
    """n / (1 + 2 sum of autocorrelations), summed until the first negative lag."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 3 or np.var(x) == 0.0:
        return n
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    tau = 1.0
    for lag in range(1, n // 2):
        rho = float(np.dot(x[:-lag], x[lag:])) / (n * var)
        if rho <= 0.0:
            break
        tau += 2.0 * rho
    return max(1, int(n / tau))


def sample(config: EnsembleConfig) -> SampleBatch:
    """Run one chain to completion."""
    chain = MetropolisChain(config)
    batch = chain.run()
    logger.info(
        f"chain seed={config.seed} q={config.q} N={config.N}: acceptance "
        f"{batch.acceptance_rate:.3f}, effective samples {batch.effective_samples}"
    )
    return batch


def gaussian_sample(
    N: int, draws: int, t2s: Sequence[float] = (1.0,), seed: int = 0
) -> SampleBatch:
    """Independent exact draws of decoupled Gaussian matrices exp(-N t2 tr X^2 / 2).

    Used where a Metropolis chain at large N would be too slow; labels match
    MetropolisChain (X1.., S2..).
    """
    if N < 1 or draws < 1:
        raise ValidationError(f"need N >= 1 and draws >= 1, got N={N}, draws={draws}")
    if any(t <= 0.0 for t in t2s):
        raise UnstableActionError(f"Gaussian couplings must be positive, got {list(t2s)}")
    rng = np.random.default_rng(seed)
    out: Dict[str, List[List[float]]] = {}
    for _ in range(draws):
        partial = None
        for i, t2 in enumerate(t2s):
            X = _gaussian_hermitian(rng, 1, N, 1.0 / (N * t2))[0]
            out.setdefault(f"X{i + 1}", []).append(np.linalg.eigvalsh(X).tolist())
            partial = X if partial is None else partial + X
            if i:
                out.setdefault(f"S{i + 1}", []).append(np.linalg.eigvalsh(partial).tolist())
    logger.info(f"gaussian sample seed={seed} N={N}: {draws} draws of {len(t2s)} matrices")
    return SampleBatch(
        eigenvalue_draws=out,
        acceptance_rate=1.0,
        effective_samples=draws,
        N=N,
        seed=seed,
    )


def _draws(batch: SampleBatch, which: str) -> np.ndarray:
    if which not in batch.eigenvalue_draws:
        raise ValidationError(f"unknown label {which}; available {batch.labels()}")
    return np.asarray(batch.eigenvalue_draws[which], dtype=float)


def empirical_resolvent(batch: SampleBatch, which: str, z: complex) -> Tuple[complex, float]:
    """Mean of (1/N) sum 1/(z - x_i) over draws, with its standard error."""
    draws = _draws(batch, which)
    z = complex(z)
    lo, hi = float(draws.min()), float(draws.max())
    width = (hi - lo) / 50.0
    if abs(z.imag) < 3.0 * width and lo - 3.0 * width <= z.real <= hi + 3.0 * width:
        raise ValidationError(f"z={z} lies within 3 bin widths of the eigenvalues of {which}")
    per_draw = np.mean(1.0 / (z - draws), axis=1)
    stderr = 0.0
    if len(per_draw) > 1:
        spread = np.var(per_draw.real, ddof=1) + np.var(per_draw.imag, ddof=1)
        stderr = float(math.sqrt(spread / len(per_draw)))
    return complex(per_draw.mean()), stderr


def histogram(
    batch: SampleBatch, which: str, bins: int = 40, support: Optional[Tuple[float, float]] = None
) -> List[Tuple[float, float, float]]:
    """Rows (bin_center, density, stderr) with the error from draw-to-draw spread."""
    draws = _draws(batch, which)
    lo, hi = support if support else (float(draws.min()), float(draws.max()))
    edges = np.linspace(lo, hi, bins + 1)
    width = edges[1] - edges[0]
    per_draw = np.array(
        [np.histogram(d, bins=edges)[0] / (len(d) * width) for d in draws]
    )
    centers = 0.5 * (edges[1:] + edges[:-1])
    mean = per_draw.mean(axis=0)
    err = per_draw.std(axis=0, ddof=1) / math.sqrt(len(draws)) if len(draws) > 1 else 0.0 * mean
    return [(float(c), float(m), float(e)) for c, m, e in zip(centers, mean, err)]


def empirical_l1(batch: SampleBatch, which: str, density, bins: int = 40) -> float:
    """L1 distance between the pooled eigenvalue histogram and a density evaluator."""
    rows = histogram(batch, which, bins=bins)
    width = rows[1][0] - rows[0][0]
    return float(sum(abs(m - float(density(c))) for c, m, _ in rows) * width)


def _gaussian_hermitian(rng: np.random.Generator, count: int, n: int, variance: float) -> np.ndarray:
    """count draws of n x n Hermitian matrices with density exp(-tr H^2 / (2 variance))."""
    sigma = math.sqrt(variance)
    g = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    upper = np.triu(g, 1) * sigma / math.sqrt(2.0)
    diag = rng.normal(size=(count, n)) * sigma
    h = upper + np.conj(np.swapaxes(upper, 1, 2))
    idx = np.arange(n)
    h[:, idx, idx] = diag
    return h


def _marginal_variance(config: EnsembleConfig) -> float:
    """Entry variance of X_1 for Gaussian potentials, with the action taken without the N factor."""
    potentials = [{m: t for m, t in p.items() if t != 0.0} for p in config.potential_coeffs]
    if any(set(p) - {2} for p in potentials):
        raise ValidationError("characteristic polynomial averages need Gaussian potentials")
    if config.q > 2:
        raise ValidationError("characteristic polynomial averages support q <= 2")
    form = np.diag([p.get(2, 0.0) for p in potentials])
    for i, j in _coupling_pairs(config.q, config.coupling_on):
        form[i, j] = form[j, i] = -1.0
    if np.linalg.eigvalsh(form).min() <= 0.0:
        raise EnsembleError("Gaussian action not bounded below")
    return float(np.linalg.inv(form)[0, 0])


def _det_samples(config: EnsembleConfig, n: int, xs: Sequence[float], count: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Array (count, len(xs)) of det(x - X) for n x n draws of X_1."""
    if n == 0:
        return np.ones((count, len(xs)))
    h = _gaussian_hermitian(rng, count, n, _marginal_variance(config))
    eig = np.linalg.eigvalsh(h)
    return np.stack([np.prod(x - eig, axis=1) for x in xs], axis=1)


def char_poly_average(config: EnsembleConfig, n: int, x: float, count: int = 20000) -> Tuple[float, float]:
    """Monte Carlo <det(x - X)> over n x n draws of X_1; returns (mean, stderr)."""
    if not 0 <= n <= 6:
        raise ValidationError(f"n={n} outside 0..6")
    rng = np.random.default_rng(config.seed)
    values = _det_samples(config, n, [x], count, rng)[:, 0]
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(count))
    sigma = math.sqrt(_marginal_variance(config))
    scale = (sigma + abs(x)) ** n
    if stderr > 0.2 * max(abs(mean), scale):
        raise EnsembleError(f"relative standard error {stderr / scale:.3f} above 20%")
    return mean, stderr


def hermite_prediction(config: EnsembleConfig, n: int, x: float) -> float:
    """(1/(2 t))^(n/2) H_n(x sqrt(t/2)) with t the inverse entry variance of X_1."""
    t = 1.0 / _marginal_variance(config)
    return (1.0 / (2.0 * t)) ** (n / 2.0) * hermite_eval(n, x * math.sqrt(t / 2.0))


def morozov_check(
    config: EnsembleConfig, n: int, M: int, xs: Sequence[float], count: int = 20000
) -> Tuple[float, float]:
    """Compare <prod_k det(x_k - X)> with det[a_{n+k-1}(x_l)] / det[x_l^(k-1)].

    Returns (|difference|, combined standard error).
    """
    if not (0 <= n <= 4 and 1 <= M <= 3 and len(xs) == M):
        raise ValidationError("need n <= 4, 1 <= M <= 3 and M points")
    xs = [float(x) for x in xs]
    gaps = [abs(a - b) for k, a in enumerate(xs) for b in xs[k + 1 :]]
    if gaps and min(gaps) < 1e-3 * (1.0 + max(abs(x) for x in xs)):
        raise ValidationError(f"points {xs} too close for the Vandermonde denominator")

    rng = np.random.default_rng(config.seed)
    base = _det_samples(config, n, xs, count, rng)
    product = np.prod(base, axis=1)
    lhs, lhs_err = float(product.mean()), float(product.std(ddof=1) / math.sqrt(count))

    alpha = {n: base}
    for m in range(n + 1, n + M):
        alpha[m] = _det_samples(config, m, xs, count, rng)
    means = {m: a.mean(axis=0) for m, a in alpha.items()}
    errs = {m: a.std(axis=0, ddof=1) / math.sqrt(count) for m, a in alpha.items()}

    vander = np.array([[x**k for x in xs] for k in range(M)])
    numer = np.array([[means[n + k][l] for l in range(M)] for k in range(M)])
    rhs = float(np.linalg.det(numer) / np.linalg.det(vander))

    # first-order error propagation through the determinant
    rhs_var = 0.0
    for k in range(M):
        for l in range(M):
            bumped = numer.copy()
            bumped[k, l] += errs[n + k][l]
            rhs_var += ((np.linalg.det(bumped) - np.linalg.det(numer)) / np.linalg.det(vander)) ** 2
    combined = math.sqrt(lhs_err**2 + rhs_var)
    residual = abs(lhs - rhs)
    logger.info(f"morozov n={n} M={M}: lhs={lhs:.6g} rhs={rhs:.6g} residual={residual:.3g}")
    return residual, combined
