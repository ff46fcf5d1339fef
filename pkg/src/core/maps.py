"""Fatgraph enumeration by Wick pairings, Tutte's quadrangulation count and growth fits."""

import logging
import math
from collections import defaultdict
from fractions import Fraction
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
import sympy

from src.config import settings
from src.core.errors import HalfEdgeBudgetError, ValidationError
from src.core.models import FatgraphCount, TruncatedSeries

logger = logging.getLogger(__name__)


class _Components:
    """Union-find over vertices."""

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def count(self) -> int:
        return len({self.find(a) for a in range(len(self.parent))})


def _rotation(profile: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Cyclic successor of every half-edge around its vertex, and the owning vertex."""
    succ, owner = [], []
    start = 0
    for v, degree in enumerate(profile):
        for k in range(degree):
            succ.append(start + (k + 1) % degree)
            owner.append(v)
        start += degree
    return succ, owner


def _pairings(half_edges: List[int]) -> Iterator[List[Tuple[int, int]]]:
    if not half_edges:
        yield []
        return
    first, rest = half_edges[0], half_edges[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for tail in _pairings(remaining):
            yield [(first, partner)] + tail


def _faces(succ: List[int], pair: List[int]) -> int:
    seen = [False] * len(succ)
    faces = 0
    for h in range(len(succ)):
        if seen[h]:
            continue
        faces += 1
        while not seen[h]:
            seen[h] = True
            h = succ[pair[h]]
    return faces


def _check_profile(profile: Sequence[int]) -> int:
    if any(d < 1 for d in profile):
        raise ValidationError(f"vertex degrees must be positive: {profile}")
    total = sum(profile)
    if total > settings.WICK_MAX_HALF_EDGES:
        raise HalfEdgeBudgetError(
            f"{total} half-edges exceed the budget of {settings.WICK_MAX_HALF_EDGES}"
        )
    return total


def symmetry_factor(profile: Sequence[int]) -> Fraction:
    """Product over degrees m of 1/(n_m! m^n_m)."""
    denominator = 1
    for degree, multiplicity in sorted(_multiplicities(profile).items()):
        denominator *= math.factorial(multiplicity) * degree**multiplicity
    return Fraction(1, denominator)


def _multiplicities(profile: Sequence[int]) -> Dict[int, int]:
    counts: Dict[int, int] = defaultdict(int)
    for d in profile:
        counts[d] += 1
    return counts


def wick_enumerate(vertex_profile: Sequence[int], connected_only: bool = True) -> List[FatgraphCount]:
    """All pairings of half-edges, binned by genus.

    Disconnected pairings (connected_only=False) are binned by the sum of the
    genera of their components.
    """
    profile = tuple(int(d) for d in vertex_profile)
    total = _check_profile(profile)
    weight = symmetry_factor(profile)
    if total % 2:
        return []

    succ, owner = _rotation(profile)
    counts: Dict[int, int] = defaultdict(int)
    pair = [0] * total
    for pairing in _pairings(list(range(total))):
        comps = _Components(len(profile))
        for a, b in pairing:
            pair[a], pair[b] = b, a
            comps.union(owner[a], owner[b])
        components = comps.count()
        if connected_only and components > 1:
            continue
        chi = len(profile) - total // 2 + _faces(succ, pair)
        genus_sum = components - chi // 2
        if chi % 2 or genus_sum < 0:
            raise ValidationError(f"inconsistent Euler characteristic {chi} for {profile}")
        counts[genus_sum] += 1

    logger.debug(f"wick_enumerate{profile}: {dict(counts)}")
    return [
        FatgraphCount(
            vertex_profile=profile, genus=g, count=c, symmetry_weight=weight * c
        )
        for g, c in sorted(counts.items())
    ]


def rooted_count(entry: FatgraphCount) -> Fraction:
    """Rooted maps: the symmetry weight times the number of half-edges."""
    return entry.symmetry_weight * sum(entry.vertex_profile)


def genus_table(vertex_profile: Sequence[int], max_genus: int = 2) -> Dict[int, Fraction]:
    """Connected symmetry weights up to max_genus."""
    if max_genus > 2:
        raise ValidationError("genus tables are limited to genus <= 2")
    return {
        e.genus: e.symmetry_weight
        for e in wick_enumerate(vertex_profile, connected_only=True)
        if e.genus <= max_genus
    }


def double_factorial_total(half_edges: int) -> int:
    """(2k - 1)!! pairings of 2k half-edges."""
    if half_edges % 2:
        return 0
    return int(sympy.factorial2(half_edges - 1)) if half_edges else 1


def tutte_formula(n: int) -> Fraction:
    """Rooted planar quadrangulations with n faces: 2 3^n (2n)! / (n! (n+2)!)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return Fraction(
        2 * 3**n * math.factorial(2 * n), math.factorial(n) * math.factorial(n + 2)
    )


def tutte_series_moments(order: int) -> TruncatedSeries:
    """Planar <tr X^2>/N of the quartic model as a series in t4: 1 + sum_n (-t4)^n T(n)."""
    coeffs = [Fraction(1)] + [(-1) ** n * tutte_formula(n) for n in range(1, order)]
    return TruncatedSeries(coefficients=coeffs, truncation_order=order)


def _log_exact(value) -> float:
    value = Fraction(value)
    if value <= 0:
        raise ValidationError(f"counts must be positive for a growth fit, got {value}")
    return math.log(value.numerator) - math.log(value.denominator)


def growth_fit(counts: Sequence, start: int = 1) -> Tuple[float, float]:
    """Fit log c_n = n log b + gamma log n + const + a/n; returns (b, gamma).

    counts[i] is c_{start + i}. The fit uses the later two thirds of the
    sequence so the 1/n correction dominates the residual.
    """
    if len(counts) < 8:
        raise ValidationError(f"need at least 8 counts, got {len(counts)}")
    n = np.arange(start, start + len(counts), dtype=float)
    logs = np.array([_log_exact(c) for c in counts])
    skip = min(len(counts) // 3, len(counts) - 6)
    n, logs = n[skip:], logs[skip:]
    basis = np.column_stack([n, np.log(n), np.ones_like(n), 1.0 / n])
    coef, *_ = np.linalg.lstsq(basis, logs, rcond=None)
    base, exponent = float(math.exp(coef[0])), float(coef[1])
    logger.info(f"growth_fit: base={base:.6f} exponent={exponent:.6f} on {len(n)} points")
    return base, exponent
