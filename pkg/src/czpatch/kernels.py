"""Homogeneous kernel catalog and algebra.

A kernel is P(x)/|x|^s with P a homogeneous polynomial.  The module
provides parity/mean-zero validity checks, the exact harmonic/radial
polynomial split, Fourier multiplier constants of homogeneous kernels,
and the divergence-form antiderivative that reduces volume integrals of
even kernels to boundary integrals of odd ones.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

from .polynomials import Exponent, HomogeneousPolynomial


class KernelError(ValueError):
    pass


class SingularityError(KernelError):
    """Kernel evaluated at its singular point."""


# ---------------------------------------------------------------------------
# kernel objects
# ---------------------------------------------------------------------------

class HomogeneousKernel:
    """K(x) = numerator(x) / |x|^power, homogeneous of degree m - power."""

    def __init__(self, numerator: HomogeneousPolynomial, power: int, name: str = ""):
        self.numerator = numerator
        self.power = int(power)
        self.name = name or f"poly_deg{numerator.degree}_pow{power}"
        self.dimension = numerator.dimension
        self.degree = numerator.degree
        self.parity = numerator.parity()
        # degree of homogeneity; a Calderon-Zygmund kernel has order -n
        self.homogeneity = self.degree - self.power

    @property
    def is_cz(self) -> bool:
        return self.homogeneity == -self.dimension and self.mean_zero_residual() <= 1e-8

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        r2 = np.sum(np.atleast_2d(x) ** 2, axis=-1)
        if np.any(r2 == 0.0):
            raise SingularityError(f"kernel {self.name} evaluated at x = 0")
        vals = np.atleast_1d(self.numerator(x)) / r2 ** (self.power / 2.0)
        return float(vals[0]) if x.ndim == 1 else vals.reshape(x.shape[:-1])

    def angular_part(self, v) -> np.ndarray | float:
        """Omega(v) = K(v) on the unit sphere = numerator restricted to |v|=1."""
        return self.numerator(v)

    def mean_zero_residual(self) -> float:
        if not hasattr(self, "_mz"):
            self._mz = mean_zero_check(self)
        return self._mz

    def __repr__(self) -> str:
        return f"HomogeneousKernel({self.name}: ({self.numerator!r})/|x|^{self.power})"


@dataclass(frozen=True)
class MultiplierSpec:
    """Parameters of the Fourier side of P_m/|x|^{n+m-alpha}."""

    m: int
    alpha: float
    n: int

    @property
    def constant(self) -> complex:
        return multiplier_constant(self.m, self.alpha, self.n)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def kernel_eval(kernel: HomogeneousKernel, x) -> np.ndarray | float:
    return kernel(x)


def _sphere_nodes(n: int, order_theta: int = 64, order_phi: int = 128):
    """Quadrature nodes/weights on the unit sphere S^{n-1} (unnormalized)."""
    if n == 2:
        t = 2.0 * np.pi * np.arange(order_phi) / order_phi
        v = np.stack([np.cos(t), np.sin(t)], axis=-1)
        w = np.full(order_phi, 2.0 * np.pi / order_phi)
        return v, w
    if n == 3:
        ct, wt = np.polynomial.legendre.leggauss(order_theta)
        st = np.sqrt(1.0 - ct**2)
        phi = 2.0 * np.pi * np.arange(order_phi) / order_phi
        v = np.empty((order_theta, order_phi, 3))
        v[..., 0] = st[:, None] * np.cos(phi)[None, :]
        v[..., 1] = st[:, None] * np.sin(phi)[None, :]
        v[..., 2] = ct[:, None] * np.ones_like(phi)[None, :]
        w = wt[:, None] * (2.0 * np.pi / order_phi) * np.ones(order_phi)[None, :]
        return v.reshape(-1, 3), w.ravel()
    raise KernelError(f"unsupported dimension {n}")


def mean_zero_check(kernel: HomogeneousKernel) -> float:
    """|integral of Omega over the unit sphere| by product quadrature.

    Gauss-Legendre x trapezoid (64 x 128) integrates polynomial angular
    parts of the catalog degrees to machine precision.
    """
    v, w = _sphere_nodes(kernel.dimension)
    return float(abs(np.sum(np.atleast_1d(kernel.angular_part(v)) * w)))


def _monomials(n: int, degree: int) -> list[Exponent]:
    if degree < 0:
        return []
    out = []
    for combo in combinations_with_replacement(range(n), degree):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(set(out))


def _solve_fraction_system(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Exact Gaussian elimination over Fractions (square, invertible)."""
    m = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(m):
        piv = next((r for r in range(col, m) if M[r][col] != 0), None)
        if piv is None:
            raise KernelError("singular system in harmonic decomposition")
        M[col], M[piv] = M[piv], M[col]
        inv = Fraction(1) / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(m):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [vr - f * vc for vr, vc in zip(M[r], M[col])]
    return [M[r][m] for r in range(m)]


def harmonic_decompose(P: HomogeneousPolynomial, full: bool = False):
    """Split P = p + |x|^2 q with p harmonic, exactly in the coefficients.

    With ``full=True`` the radial split is recursed, returning the list
    [p_k, p_{k-2}, ...] with P = sum |x|^{2i} p_{k-2i} and every p harmonic.
    """
    n, k = P.dimension, P.degree
    if P.is_zero() or k <= 1:
        return ([P] if full else (P, HomogeneousPolynomial.zero(n)))
    r2 = HomogeneousPolynomial.radius_squared(n)
    basis = _monomials(n, k - 2)
    idx = {e: i for i, e in enumerate(basis)}
    # Solve Delta(|x|^2 q) = Delta P for q; the map q -> Delta(|x|^2 q) is a
    # bijection on homogeneous polynomials of degree k-2.
    A = [[Fraction(0)] * len(basis) for _ in basis]
    for j, e in enumerate(basis):
        img = (r2 * HomogeneousPolynomial.monomial(n, e)).laplacian()
        for ee, c in img.coefficients.items():
            A[idx[ee]][j] += c
    lap = P.laplacian()
    b = [lap.coefficients.get(e, Fraction(0)) for e in basis]
    q_coeffs = _solve_fraction_system(A, b)
    q = HomogeneousPolynomial(n, {e: c for e, c in zip(basis, q_coeffs)})
    p = P - r2 * q
    assert p.is_harmonic()
    if not full:
        return p, q
    return [p] + harmonic_decompose(q, full=True)


def multiplier_constant(m: int, alpha: float, n: int) -> complex:
    """Constant relating P_m/|x|^{n+m-alpha} to P_m(xi)/|xi|^{m+alpha}.

    Defined for 0 < alpha <= n;  alpha -> 0 is the principal-value limit
    used by the grid oracle (valid for m >= 1).
    """
    if m < 0 or n < 1:
        raise KernelError("need m >= 0 and n >= 1")
    if not (0 < alpha <= n):
        raise KernelError(f"alpha={alpha} outside (0, {n}]")
    num_arg = (m + alpha) / 2.0
    den_arg = (m + n - alpha) / 2.0
    if num_arg <= 0 and float(num_arg).is_integer():
        raise KernelError(f"Gamma pole at (m+alpha)/2 = {num_arg}")
    if num_arg <= 0:
        raise KernelError("nonpositive numerator Gamma argument")
    if den_arg <= 0:
        raise KernelError(f"Gamma pole at (m+n-alpha)/2 = {den_arg}; constant degenerates")
    return (1j ** m) * math.pi ** (n / 2.0 - alpha) * math.gamma(num_arg) / math.gamma(den_arg)


def divergence_antiderivative(kernel: HomogeneousKernel) -> list[HomogeneousKernel]:
    """Vector field A with div A = K for K = P/|x|^{n+2l}, P harmonic even.

    A_j = -d/dx_j ( P |x|^{-(n+2l-2)} ) / (2l (n+2l-2)), expanded so each
    component is (dP_j |x|^2 - (n+2l-2) x_j P) / (-2l(n+2l-2) |x|^{n+2l}),
    an odd kernel of homogeneity -(n-1).
    """
    P = kernel.numerator
    n = kernel.dimension
    if P.degree % 2 != 0 or P.degree < 2:
        raise KernelError("divergence antiderivative needs even numerator degree >= 2")
    if not P.is_harmonic():
        raise KernelError("numerator must be harmonic; run harmonic_decompose first")
    two_l = P.degree
    if kernel.power != n + two_l:
        raise KernelError(f"kernel power must be n+2l = {n + two_l}, got {kernel.power}")
    s = n + two_l - 2
    scale = Fraction(-1, two_l * s)
    r2 = HomogeneousPolynomial.radius_squared(n)
    comps = []
    for j in range(n):
        xj = HomogeneousPolynomial.coordinate(n, j)
        numer = (P.derivative(j) * r2 - xj * P * s) * scale
        comps.append(HomogeneousKernel(numer, n + two_l, name=f"{kernel.name}_A{j + 1}"))
    return comps


def radial_profile_G(r: float, a: float) -> float:
    """Definite integral of rho^3 (a^2 rho^2 + 1)^{-5/2} over [0, 1/r].

    Closed form fixed so G -> 0 as r -> infinity; a = 0 degenerates to the
    plain power integral (1/r)^4 / 4.
    """
    if r <= 0:
        raise KernelError("need r > 0")
    if a < 0:
        raise KernelError("need a >= 0")
    if a == 0.0:
        return 0.25 / r**4
    q = (a / r) ** 2
    return -(2.0 + 3.0 * q) / (3.0 * a**4 * (1.0 + q) ** 1.5) + 2.0 / (3.0 * a**4)


def radial_profile_G_derivative(r: float, a: float) -> float:
    """d/dr of radial_profile_G; equals -(a^2 + r^2)^{-5/2}, so |.| <= a^-5."""
    if r <= 0 or a < 0:
        raise KernelError("need r > 0, a >= 0")
    return -((a**2 + r**2) ** -2.5)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _harm(n: int, expo: Exponent) -> HomogeneousPolynomial:
    p, _ = harmonic_decompose(HomogeneousPolynomial.monomial(n, expo))
    return p


def _build_catalog() -> dict[str, HomogeneousKernel]:
    cat: dict[str, HomogeneousKernel] = {}
    # n=3, order 2: symbols of d_j d_k (-Laplace)^{-1} up to the 3/(4 pi)
    # normalization (numerators kept rational: x_j x_k resp. x_j^2 - |x|^2/3)
    for j in range(3):
        for k in range(j, 3):
            e = [0, 0, 0]
            e[j] += 1
            e[k] += 1
            cat[f"riesz2_{j + 1}{k + 1}"] = HomogeneousKernel(
                _harm(3, tuple(e)), 5, name=f"riesz2_{j + 1}{k + 1}")
    # n=3, order 4
    cat["riesz4_1123"] = HomogeneousKernel(_harm(3, (2, 1, 1)), 7, name="riesz4_1123")
    cat["riesz4_1122"] = HomogeneousKernel(_harm(3, (2, 2, 0)), 7, name="riesz4_1122")
    # n=3 odd
    cat["odd_x1"] = HomogeneousKernel(HomogeneousPolynomial.coordinate(3, 0), 4,
                                      name="odd_x1")
    # n=2 even
    cat["riesz2d_diff"] = HomogeneousKernel(
        HomogeneousPolynomial(2, {(2, 0): 1, (0, 2): -1}), 4, name="riesz2d_diff")
    cat["riesz2d_cross"] = HomogeneousKernel(
        HomogeneousPolynomial(2, {(1, 1): 2}), 4, name="riesz2d_cross")
    # n=2 odd
    cat["odd2d_x1"] = HomogeneousKernel(HomogeneousPolynomial.coordinate(2, 0), 3,
                                        name="odd2d_x1")
    return cat


def catalog() -> dict[str, HomogeneousKernel]:
    return dict(_CATALOG)


def get_kernel(name: str) -> HomogeneousKernel:
    try:
        return _CATALOG[name]
    except KeyError:
        raise KernelError(
            f"unknown kernel {name!r}; catalog: {sorted(_CATALOG)}") from None


def even_catalog(n: int) -> dict[str, HomogeneousKernel]:
    return {k: v for k, v in _CATALOG.items()
            if v.dimension == n and v.parity == "even"}


_TERM_RE = re.compile(r"^\s*([+-]?\s*\d*(?:\.\d+)?(?:/\d+)?)\s*\*?\s*((?:x\d+(?:\^\d+)?\*?)*)\s*$")


def parse_kernel_spec(spec: str) -> HomogeneousKernel:
    """Parse 'poly: x1*x2*x3; power: 5; n: 3' into a kernel."""
    fields = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, val = part.partition(":")
        fields[key.strip().lower()] = val.strip()
    missing = {"poly", "power", "n"} - set(fields)
    if missing:
        raise KernelError(f"kernel spec missing fields: {sorted(missing)}")
    n = int(fields["n"])
    power = int(fields["power"])
    poly_src = fields["poly"].replace("-", "+-")
    coeffs: dict[Exponent, Fraction] = {}
    for term in poly_src.split("+"):
        term = term.strip()
        if not term:
            continue
        m = _TERM_RE.match(term)
        if not m:
            raise KernelError(f"cannot parse polynomial term {term!r}")
        coef_s = m.group(1).replace(" ", "")
        if coef_s in ("", "+"):
            coef = Fraction(1)
        elif coef_s == "-":
            coef = Fraction(-1)
        else:
            coef = Fraction(coef_s)
        expo = [0] * n
        for var in filter(None, m.group(2).split("*")):
            name, _, pw = var.partition("^")
            i = int(name[1:]) - 1
            if not 0 <= i < n:
                raise KernelError(f"variable {name} out of range for n={n}")
            expo[i] += int(pw) if pw else 1
        e = tuple(expo)
        coeffs[e] = coeffs.get(e, Fraction(0)) + coef
    return HomogeneousKernel(HomogeneousPolynomial(n, coeffs), power, name=spec)


def resolve_kernel(name_or_spec: str) -> HomogeneousKernel:
    if name_or_spec in _CATALOG:
        return _CATALOG[name_or_spec]
    if ":" in name_or_spec:
        return parse_kernel_spec(name_or_spec)
    raise KernelError(f"unknown kernel {name_or_spec!r}")


_CATALOG = _build_catalog()
