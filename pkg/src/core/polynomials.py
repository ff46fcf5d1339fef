"""Bivariate polynomials with exact or symbolic coefficients."""

import json
import logging
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

X, Y = sympy.symbols("x y")
T2, T3, T4 = sympy.symbols("t2 t3 t4")

Monomial = Tuple[int, int]


class BivariatePolynomial(BaseModel):
    """sum over (i, j) of c_ij x^i y^j.

    Coefficients are sympy expressions: rationals, expressions in the couplings
    t2, t3, t4, or the undetermined constants of a curve template.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: Dict[Monomial, Any]
    constants: Tuple[Any, ...] = ()
    label: str = ""
    q: Optional[int] = None
    k: Optional[int] = None
    p: Optional[int] = None

    @field_validator("coefficients", mode="before")
    @classmethod
    def drop_zeros(cls, v):
        out = {}
        for key, value in dict(v).items():
            i, j = int(key[0]), int(key[1])
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in monomial {key}")
            c = sympy.sympify(value)
            if c != 0:
                out[(i, j)] = c
        return out

    @model_validator(mode="after")
    def known_constants(self):
        self.constants = tuple(c for c in self.constants if c in self.free_symbols)
        return self

    @classmethod
    def from_expr(cls, expr, constants: Iterable = (), **meta) -> "BivariatePolynomial":
        poly = sympy.Poly(sympy.expand(expr), X, Y)
        return cls(coefficients=dict(poly.terms()), constants=tuple(constants), **meta)

    @property
    def degrees(self) -> Tuple[int, int]:
        if not self.coefficients:
            return (0, 0)
        return (max(i for i, _ in self.coefficients), max(j for _, j in self.coefficients))

    @property
    def free_symbols(self) -> set:
        symbols = set()
        for c in self.coefficients.values():
            symbols |= c.free_symbols
        return symbols

    @property
    def is_numeric(self) -> bool:
        return not self.free_symbols

    def coefficient(self, i: int, j: int):
        return self.coefficients.get((i, j), sympy.Integer(0))

    def as_expr(self):
        return sum(c * X**i * Y**j for (i, j), c in self.coefficients.items())

    def subs(self, mapping: Mapping) -> "BivariatePolynomial":
        """Substitute couplings or constants; zero coefficients disappear."""
        return BivariatePolynomial(
            coefficients={m: sympy.simplify(c.subs(mapping)) for m, c in self.coefficients.items()},
            constants=self.constants,
            label=self.label,
            q=self.q,
            k=self.k,
            p=self.p,
        )

    def numeric_coefficients(self) -> Dict[Monomial, complex]:
        if not self.is_numeric:
            raise ValidationError(f"unfixed symbols {sorted(map(str, self.free_symbols))}")
        return {m: complex(sympy.N(c, 20)) for m, c in self.coefficients.items()}

    def evaluate(self, x, y):
        """F(x, y) for numeric coefficients; accepts numpy arrays."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        total = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for (i, j), c in self.numeric_coefficients().items():
            total = total + c * x**i * y**j
        return total if total.ndim else complex(total)

    def term_scale(self, x, y):
        """sum |c_ij x^i y^j|, the natural size of F at (x, y)."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        total = np.zeros(np.broadcast(x, y).shape)
        for (i, j), c in self.numeric_coefficients().items():
            total = total + np.abs(c * x**i * y**j)
        return total if total.ndim else float(total)

    def relative_residual(self, x, y) -> float:
        """max |F| / sum |terms| over the given points."""
        values = np.abs(np.atleast_1d(self.evaluate(x, y)))
        scale = np.atleast_1d(self.term_scale(x, y))
        return float(np.max(values / np.maximum(scale, 1e-300)))

    def swap(self) -> "BivariatePolynomial":
        """F(y, x)."""
        return BivariatePolynomial(
            coefficients={(j, i): c for (i, j), c in self.coefficients.items()},
            constants=self.constants,
            label=self.label,
        )

    def to_json(self) -> str:
        """{"monomials": [[i, j, numerator, denominator], ...]} sorted by (i, j)."""
        rows: List[List[int]] = []
        for (i, j), c in sorted(self.coefficients.items()):
            if c.free_symbols:
                raise ValidationError(f"coefficient of x^{i} y^{j} is symbolic: {c}")
            if c.is_Rational:
                num, den = int(c.p), int(c.q)
            else:
                value = complex(sympy.N(c, 20))
                if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
                    raise ValidationError(f"complex coefficient {value} cannot be exported")
                frac = Fraction(value.real).limit_denominator(10**12)
                num, den = frac.numerator, frac.denominator
            rows.append([i, j, num, den])
        return json.dumps({"monomials": rows})

    @classmethod
    def from_json(cls, text: str) -> "BivariatePolynomial":
        data = json.loads(text)
        try:
            terms = {(int(i), int(j)): sympy.Rational(int(n), int(d)) for i, j, n, d in data["monomials"]}
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed polynomial JSON: {e}")
        return cls(coefficients=terms)

    def __str__(self) -> str:
        return str(self.as_expr())
