"""Homogeneous polynomials with exact rational coefficients.

Coefficients are stored as a sparse map from exponent multi-index to
``fractions.Fraction`` so that algebraic operations (derivatives,
Laplacians, the harmonic/radial split) are exact.  Evaluation compiles
the monomials once into float arrays and is vectorized over point
batches.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

Exponent = tuple[int, ...]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, float):
        return Fraction(c).limit_denominator(10**12)
    return Fraction(c)


class HomogeneousPolynomial:
    """Homogeneous polynomial of fixed degree in ``dimension`` variables."""

    def __init__(self, dimension: int, coefficients: Mapping[Exponent, object]):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        coeffs: dict[Exponent, Fraction] = {}
        degree = None
        for expo, c in coefficients.items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != dimension or any(e < 0 for e in expo):
                raise ValueError(f"bad exponent {expo} for dimension {dimension}")
            c = _as_fraction(c)
            if c == 0:
                continue
            d = sum(expo)
            if degree is None:
                degree = d
            elif d != degree:
                raise ValueError("coefficients mix degrees; polynomial must be homogeneous")
            coeffs[expo] = coeffs.get(expo, Fraction(0)) + c
        self.dimension = dimension
        self.coefficients = {e: c for e, c in coeffs.items() if c != 0}
        # degree of the zero polynomial is fixed by convention at 0
        self.degree = degree if (degree is not None and self.coefficients) else 0
        self._compiled: tuple[np.ndarray, np.ndarray] | None = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, dimension: int) -> "HomogeneousPolynomial":
        return cls(dimension, {})

    @classmethod
    def monomial(cls, dimension: int, expo: Iterable[int], coeff=1) -> "HomogeneousPolynomial":
        return cls(dimension, {tuple(expo): coeff})

    @classmethod
    def coordinate(cls, dimension: int, j: int) -> "HomogeneousPolynomial":
        e = [0] * dimension
        e[j] = 1
        return cls(dimension, {tuple(e): 1})

    @classmethod
    def radius_squared(cls, dimension: int) -> "HomogeneousPolynomial":
        return cls(dimension, {tuple(2 if i == j else 0 for i in range(dimension)): 1
                               for j in range(dimension)})

    # -- algebra --------------------------------------------------------

    def __add__(self, other: "HomogeneousPolynomial") -> "HomogeneousPolynomial":
        self._check_compatible(other)
        out = dict(self.coefficients)
        for e, c in other.coefficients.items():
            out[e] = out.get(e, Fraction(0)) + c
        return HomogeneousPolynomial(self.dimension, out)

    def __sub__(self, other: "HomogeneousPolynomial") -> "HomogeneousPolynomial":
        return self + (other * -1)

    def __mul__(self, other) -> "HomogeneousPolynomial":
        if isinstance(other, HomogeneousPolynomial):
            if other.dimension != self.dimension:
                raise ValueError("dimension mismatch")
            out: dict[Exponent, Fraction] = {}
            for e1, c1 in self.coefficients.items():
                for e2, c2 in other.coefficients.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    out[e] = out.get(e, Fraction(0)) + c1 * c2
            return HomogeneousPolynomial(self.dimension, out)
        c = _as_fraction(other)
        return HomogeneousPolynomial(
            self.dimension, {e: cc * c for e, cc in self.coefficients.items()})

    __rmul__ = __mul__

    def _check_compatible(self, other: "HomogeneousPolynomial") -> None:
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        if self.coefficients and other.coefficients and other.degree != self.degree:
            raise ValueError("degree mismatch in homogeneous sum")

    # -- calculus -------------------------------------------------------

    def derivative(self, j: int) -> "HomogeneousPolynomial":
        out: dict[Exponent, Fraction] = {}
        for e, c in self.coefficients.items():
            if e[j] == 0:
                continue
            d = list(e)
            d[j] -= 1
            out[tuple(d)] = out.get(tuple(d), Fraction(0)) + c * e[j]
        return HomogeneousPolynomial(self.dimension, out)

    def laplacian(self) -> "HomogeneousPolynomial":
        out = HomogeneousPolynomial.zero(self.dimension)
        for j in range(self.dimension):
            out = out + self.derivative(j).derivative(j)
        return out

    def is_harmonic(self) -> bool:
        return not self.laplacian().coefficients

    # -- structure ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coefficients

    def parity(self) -> str:
        """'even' or 'odd' under x -> -x (zero polynomial counts as even)."""
        return "even" if self.degree % 2 == 0 else "odd"

    def __eq__(self, other) -> bool:
        return (isinstance(other, HomogeneousPolynomial)
                and self.dimension == other.dimension
                and self.coefficients == other.coefficients)

    def __repr__(self) -> str:
        if not self.coefficients:
            return "0"
        terms = []
        for e, c in sorted(self.coefficients.items(), reverse=True):
            mono = "*".join(f"x{i+1}^{p}" if p > 1 else f"x{i+1}"
                            for i, p in enumerate(e) if p > 0) or "1"
            terms.append(f"{c}*{mono}")
        return " + ".join(terms)

    # -- evaluation -----------------------------------------------------

    def _compile(self) -> tuple[np.ndarray, np.ndarray]:
        if self._compiled is None:
            expos = np.array(sorted(self.coefficients), dtype=np.int64).reshape(
                -1, self.dimension)
            coefs = np.array([float(self.coefficients[tuple(e)]) for e in expos])
            self._compiled = (expos, coefs)
        return self._compiled

    def __call__(self, x) -> np.ndarray | float:
        """Evaluate at point(s); x has shape (..., dimension).

        Integer powers go through cumulative-product tables, which beats
        numpy's generic pow for the batch sizes the quadratures use.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[-1] != self.dimension:
            raise ValueError(f"points must have last axis {self.dimension}")
        if not self.coefficients:
            out = np.zeros(pts.shape[:-1])
            return float(out[0]) if scalar else out
        expos, coefs = self._compile()
        tables = []
        for j in range(self.dimension):
            emax = int(expos[:, j].max())
            tab = [np.ones(pts.shape[:-1])]
            for _ in range(emax):
                tab.append(tab[-1] * pts[..., j])
            tables.append(tab)
        out = np.zeros(pts.shape[:-1])
        for e, c in zip(expos, coefs):
            term = None
            for j in range(self.dimension):
                if e[j] == 0:
                    continue
                term = tables[j][e[j]] if term is None else term * tables[j][e[j]]
            out += c * (term if term is not None else 1.0)
        return float(out[0]) if scalar else out
