"""Core data models."""

from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ChebKind(str, Enum):
    """Chebyshev function kind."""

    FIRST = "first"
    SECOND = "second"


class CutSide(str, Enum):
    """Side of a branch cut used for boundary values."""

    PLUS = "plus"
    MINUS = "minus"


class TransformKind(str, Enum):
    """Operator-pair transformations."""

    LINEAR_CANONICAL = "linear_canonical"
    CHARGE_CONJUGATION = "charge_conjugation"
    DUALITY = "duality"


class OutputFormat(str, Enum):
    """CLI output format."""

    JSON = "json"
    CSV = "csv"


class ChebSpec(BaseModel):
    """Chebyshev function of real order."""

    kind: ChebKind
    order: float

    @field_validator("order", mode="before")
    @classmethod
    def finite_order(cls, v):
        v = float(Fraction(v)) if isinstance(v, (str, Fraction)) else float(v)
        if not np.isfinite(v):
            raise ValueError("order must be finite")
        return v


class TorusParam(BaseModel):
    """Two-cut torus data for the band [alpha, beta]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    alpha: float = Field(gt=0)
    beta: float
    tau: complex
    K: float = Field(gt=0)
    Kprime: float = Field(gt=0)

    @model_validator(mode="after")
    def ordered_band(self):
        if self.beta <= self.alpha:
            raise ValueError("beta must exceed alpha")
        return self

    @property
    def modulus(self) -> float:
        return self.alpha / self.beta


class SpectralDensity(BaseModel):
    """Probability density on a single real interval."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    support: Tuple[float, float]
    evaluate: Callable[[Any], Any]
    samples: Optional[List[float]] = None
    label: str = ""

    @field_validator("support", mode="before")
    @classmethod
    def ordered_support(cls, v):
        a, b = (float(v[0]), float(v[1]))
        if not a < b:
            raise ValueError(f"support endpoints out of order: {v}")
        return (a, b)

    def __call__(self, x):
        """Density at x, zero outside the support."""
        x = np.asarray(x, dtype=float)
        a, b = self.support
        inside = (x > a) & (x < b)
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = np.maximum(np.asarray(self.evaluate(x[inside]), dtype=float), 0.0)
        return out if out.ndim else float(out)


class TruncatedSeries(BaseModel):
    """Power or Puiseux series sum_k c_k x^(offset + k*step), known below truncation_order."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    exponent_step: Fraction = Fraction(1)
    offset: Fraction = Fraction(0)
    coefficients: List[Any]
    truncation_order: Fraction

    @field_validator("exponent_step", "offset", "truncation_order", mode="before")
    @classmethod
    def as_fraction(cls, v):
        return Fraction(v) if not isinstance(v, Fraction) else v

    @model_validator(mode="after")
    def within_truncation(self):
        limit = self.max_terms()
        if len(self.coefficients) > limit:
            self.coefficients = list(self.coefficients[:limit])
        return self

    def max_terms(self) -> int:
        """Number of coefficients strictly below the truncation order."""
        span = (self.truncation_order - self.offset) / self.exponent_step
        return max(0, -(-span.numerator // span.denominator))

    def exponent(self, index: int) -> Fraction:
        return self.offset + index * self.exponent_step

    def coefficient(self, exponent) -> Any:
        """Coefficient at a given exponent, zero when absent."""
        k = (Fraction(exponent) - self.offset) / self.exponent_step
        if k.denominator != 1 or k < 0 or k >= len(self.coefficients):
            return 0
        return self.coefficients[int(k)]

    def evaluate(self, x: complex) -> complex:
        return sum(
            complex(c) * x ** float(self.exponent(i)) for i, c in enumerate(self.coefficients)
        )


class EnsembleConfig(BaseModel):
    """Coupled Hermitian matrix chain for Metropolis sampling."""

    N: int = Field(ge=2, le=1024)
    q: int = 1
    potential_coeffs: List[Dict[int, float]]
    coupling_on: bool = True
    seed: int = 0
    steps: int = 200
    burn_in: int = 50
    thinning: int = 2
    proposal_scale: float = 0.5

    @field_validator("potential_coeffs", mode="before")
    @classmethod
    def int_keys(cls, v):
        return [{int(m): float(t) for m, t in dict(c).items()} for c in v]

    @model_validator(mode="after")
    def matrices_match(self):
        if self.q not in (1, 2, 3):
            raise ValueError(f"q={self.q} outside supported set (1, 2, 3)")
        if len(self.potential_coeffs) == 1 and self.q > 1:
            self.potential_coeffs = [dict(self.potential_coeffs[0]) for _ in range(self.q)]
        if len(self.potential_coeffs) != self.q:
            raise ValueError("one potential per matrix required")
        return self

    def leading_even(self, i: int) -> Tuple[int, float]:
        """Highest-degree coefficient of matrix i's potential."""
        coeffs = {m: t for m, t in self.potential_coeffs[i].items() if t != 0.0}
        top = max(coeffs) if coeffs else 0
        return top, coeffs.get(top, 0.0)


class SampleBatch(BaseModel):
    """Eigenvalue draws of every matrix and of partial sums X_1+...+X_p."""

    eigenvalue_draws: Dict[str, List[List[float]]]
    acceptance_rate: float
    effective_samples: int
    N: int
    regularized: bool = False
    seed: int = 0

    def labels(self) -> List[str]:
        return sorted(self.eigenvalue_draws)


class FatgraphCount(BaseModel):
    """Weighted number of fatgraphs of one genus for a vertex profile."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    vertex_profile: Tuple[int, ...]
    genus: int = Field(ge=0)
    count: int = Field(ge=0)
    symmetry_weight: Fraction

    @field_validator("symmetry_weight", mode="before")
    @classmethod
    def as_fraction(cls, v):
        return Fraction(v)


class EllipticWY(BaseModel):
    """Solved single-cut data of the Y-resolvent in elliptic form."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: float
    t2: float
    t3: float
    nu: float
    delta_U: float
    band: Tuple[float, float]
    f_coeffs: List[complex]
    tau: complex
    residual: float = 0.0
    density_coeffs: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def band_above_shift(self):
        if not self.band[0] > self.delta_U:
            raise ValueError("band must lie to the right of delta_U")
        return self

    @property
    def w_band(self) -> Tuple[float, float]:
        return (
            float(np.sqrt(self.band[0] - self.delta_U)),
            float(np.sqrt(self.band[1] - self.delta_U)),
        )


class CriticalPoint(BaseModel):
    """Critical couplings of the q-state chain, both sign branches."""

    q: int
    t2c: float
    t3c: float
    branches: List[Tuple[float, float]]
    gamma_s: str
    nu: str


class ScalingFit(BaseModel):
    """Near-critical exponent fit and, where available, the eta-profile check."""

    q: int
    nu: float
    exponent: float
    expected_exponent: float
    profile_ratio: Optional[float] = None
    expected_profile_ratio: Optional[float] = None


class YoungDiagram(BaseModel):
    """Weakly decreasing row lengths; trailing zeros are dropped."""

    model_config = ConfigDict(frozen=True)

    rows: Tuple[int, ...] = ()

    @field_validator("rows", mode="before")
    @classmethod
    def normalized(cls, v):
        rows = tuple(int(r) for r in v)
        if any(r < 0 for r in rows):
            raise ValueError("rows must be non-negative")
        if any(a < b for a, b in zip(rows, rows[1:])):
            raise ValueError(f"rows must be weakly decreasing: {rows}")
        while rows and rows[-1] == 0:
            rows = rows[:-1]
        return rows

    @property
    def size(self) -> int:
        return sum(self.rows)

    def padded(self, n: int) -> Tuple[int, ...]:
        if len(self.rows) > n:
            raise ValueError(f"{self.rows} has more than {n} rows")
        return self.rows + (0,) * (n - len(self.rows))

    def fits(self, p: int, n: int) -> bool:
        """Membership in Lambda_{p,n}."""
        return len(self.rows) <= n and (not self.rows or self.rows[0] <= p - n)

    def transpose(self) -> "YoungDiagram":
        if not self.rows:
            return YoungDiagram()
        return YoungDiagram(rows=[sum(1 for r in self.rows if r > a) for a in range(self.rows[0])])

    def __str__(self) -> str:
        return "(" + ",".join(str(r) for r in self.rows) + ")" if self.rows else "()"


class RunConfig(BaseModel):
    """Resolved CLI invocation."""

    subcommand: str
    parameters: Dict[str, str] = Field(default_factory=dict)
    seed: Optional[int] = None
    output_path: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON
