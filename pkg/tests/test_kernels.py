import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from czpatch.kernels import (HomogeneousKernel, KernelError, catalog,
                             divergence_antiderivative, get_kernel,
                             harmonic_decompose, mean_zero_check,
                             multiplier_constant, parse_kernel_spec,
                             radial_profile_G, radial_profile_G_derivative,
                             resolve_kernel)
from czpatch.polynomials import HomogeneousPolynomial

FLAGSHIP = "poly: x1*x2*x3; power: 5; n: 3"


def test_kernel_eval_flagship_value():
    k = parse_kernel_spec(FLAGSHIP)
    # direct arithmetic: 1 / 3^(5/2)
    assert k(np.array([1.0, 1.0, 1.0])) == pytest.approx(3.0 ** -2.5, rel=1e-14)


def test_odd_parity_at_random_points(rng):
    k = parse_kernel_spec(FLAGSHIP)
    x = rng.normal(size=(100, 3))
    assert_allclose(k(-x), -k(x), rtol=1e-13)


@pytest.mark.parametrize("name", sorted(catalog()))
def test_homogeneity_scaling(name, rng):
    k = get_kernel(name)
    x = rng.normal(size=(40, k.dimension))
    x = x[np.linalg.norm(x, axis=1) > 0.1]
    for lam in rng.uniform(0.1, 10.0, size=5):
        assert_allclose(k(lam * x), lam**k.homogeneity * k(x), rtol=1e-12)


def test_singularity_error():
    k = get_kernel("riesz2_12")
    with pytest.raises(KernelError):
        k(np.zeros(3))


def test_mean_zero_flagship_and_swaps():
    assert mean_zero_check(parse_kernel_spec(FLAGSHIP)) <= 1e-12
    k = parse_kernel_spec("poly: x1^2 - x2^2; power: 5; n: 3")
    assert mean_zero_check(k) <= 1e-10


def test_mean_zero_flags_noncancelling_kernel():
    k = parse_kernel_spec("poly: x1^2; power: 5; n: 3")
    # sphere average of x1^2 is |S^{n-1}|/n by symmetry
    expected = 4.0 * math.pi / 3.0
    assert mean_zero_check(k) == pytest.approx(expected, rel=1e-10)
    assert not k.is_cz


def test_mean_zero_all_catalog_cz_kernels():
    for name, k in catalog().items():
        assert k.mean_zero_residual() <= 1e-8, name
        assert k.is_cz, name


def test_harmonic_decompose_x1sq_2d():
    p = HomogeneousPolynomial(2, {(2, 0): 1})
    h, r = harmonic_decompose(p)
    assert h.coefficients == {(2, 0): Fraction(1, 2), (0, 2): Fraction(-1, 2)}
    assert r.coefficients == {(0, 0): Fraction(1, 2)}
    assert h.laplacian().is_zero()


def test_harmonic_decompose_already_harmonic():
    p = HomogeneousPolynomial(3, {(1, 1, 1): 1})
    h, r = harmonic_decompose(p)
    assert h == p and r.is_zero()


def test_harmonic_decompose_pure_radial():
    p = HomogeneousPolynomial.radius_squared(3)
    h, r = harmonic_decompose(p)
    assert h.is_zero()
    assert r.coefficients == {(0, 0, 0): Fraction(1)}


def test_harmonic_decompose_random_reconstruction(rng):
    for _ in range(5):
        coeffs = {}
        for _ in range(6):
            e = tuple(rng.integers(0, 5, size=3))
            if sum(e) != 4:
                continue
            coeffs[e] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
        if not coeffs:
            continue
        p = HomogeneousPolynomial(3, coeffs)
        h, r = harmonic_decompose(p)
        back = h + HomogeneousPolynomial.radius_squared(3) * r
        assert back == p          # coefficient-exact reconstruction
        assert h.laplacian().is_zero()


def test_harmonic_decompose_full_expansion():
    p = HomogeneousPolynomial(3, {(4, 0, 0): 1})
    parts = harmonic_decompose(p, full=True)
    r2 = HomogeneousPolynomial.radius_squared(3)
    rebuilt = HomogeneousPolynomial.zero(3)
    mult = HomogeneousPolynomial(3, {(0, 0, 0): 1})
    for q in parts:
        assert q.laplacian().is_zero()
        rebuilt = rebuilt + mult * q
        mult = mult * r2
    assert rebuilt == p


def test_multiplier_constant_closed_forms():
    # equal Gamma arguments cancel
    assert multiplier_constant(2, 1, 2) == pytest.approx(-1.0)
    # Gamma(1/2) = sqrt(pi)
    assert multiplier_constant(0, 1, 3) == pytest.approx(math.pi)
    # Gamma-table arithmetic: i^4 pi^{-1/2} Gamma(3)/Gamma(5/2) = 8/(3 pi)
    assert multiplier_constant(4, 2, 3) == pytest.approx(8.0 / (3.0 * math.pi))


def test_multiplier_constant_against_independent_gamma(rng):
    for _ in range(20):
        m = int(rng.integers(0, 7))
        n = int(rng.integers(2, 4))
        alpha = float(rng.uniform(0.05, n - 1e-3))
        got = multiplier_constant(m, alpha, n)
        expect = complex(mpmath.mpc(1j) ** m * mpmath.pi ** (n / 2 - alpha)
                         * mpmath.gamma((m + alpha) / 2)
                         / mpmath.gamma((m + n - alpha) / 2))
        assert abs(got - expect) <= 1e-12 * abs(expect)


def test_multiplier_constant_validation():
    with pytest.raises(KernelError):
        multiplier_constant(2, 0.0, 3)  # alpha out of range
    with pytest.raises(KernelError):
        multiplier_constant(2, 5.0, 3)
    with pytest.raises(KernelError):
        multiplier_constant(0, 3.0, 3)  # Gamma pole in the denominator arg


def _fd_divergence(comps, x, h=1e-5):
    div = np.zeros(len(x))
    for j, a in enumerate(comps):
        e = np.zeros(x.shape[1])
        e[j] = h
        div += (a(x + e) - a(x - e)) / (2.0 * h)
    return div


@pytest.mark.parametrize("name", [n for n, k in catalog().items()
                                  if k.parity == "even"])
def test_divergence_antiderivative_fd(name, rng):
    k = get_kernel(name)
    comps = divergence_antiderivative(k)
    n = k.dimension
    x = rng.normal(size=(1000, n))
    r = np.linalg.norm(x, axis=1)
    x = x[(r > 0.5) & (r < 2.0)]
    div = _fd_divergence(comps, x)
    assert_allclose(div, k(x), rtol=1e-6)
    # parity: components of the antiderivative of an even kernel are odd
    for a in comps:
        assert a.parity == "odd"
        assert_allclose(a(2.0 * x), 2.0 ** (1 - n) * a(x), rtol=1e-12)


def test_divergence_antiderivative_requires_harmonic():
    bad = HomogeneousKernel(HomogeneousPolynomial(3, {(2, 0, 0): 1}), 5)
    with pytest.raises(KernelError):
        divergence_antiderivative(bad)


def test_radial_profile_vanishes_at_infinity():
    assert radial_profile_G(1e9, 1.3) == pytest.approx(0.0, abs=1e-30)


def test_radial_profile_matches_quadrature():
    for a, r in [(1.0, 1.0), (0.3, 2.0), (2.5, 0.4)]:
        val, err = quad(lambda rho: rho**3 / (a**2 * rho**2 + 1.0) ** 2.5,
                        0.0, 1.0 / r, epsabs=1e-14, epsrel=1e-14)
        assert radial_profile_G(r, a) == pytest.approx(val, abs=1e-12)


def test_radial_profile_a_zero_limit():
    assert radial_profile_G(2.0, 0.0) == pytest.approx((1 / 2.0) ** 4 / 4.0)


def test_radial_profile_derivative_bound(rng):
    for _ in range(50):
        a = float(rng.uniform(0.2, 3.0))
        r = float(rng.uniform(0.1, 5.0))
        d = radial_profile_G_derivative(r, a)
        h = 1e-6 * r
        fd = (radial_profile_G(r + h, a) - radial_profile_G(r - h, a)) / (2 * h)
        assert d == pytest.approx(fd, rel=1e-5, abs=1e-12)
        assert abs(d) <= a ** -5 + 1e-15


def test_parse_kernel_spec_roundtrip_and_errors():
    k = parse_kernel_spec("poly: 2*x1*x2 - x2^2; power: 4; n: 2")
    assert k.degree == 2 and k.power == 4
    with pytest.raises(KernelError):
        parse_kernel_spec("poly: x1; n: 2")
    with pytest.raises(KernelError):
        parse_kernel_spec("poly: x5; power: 3; n: 2")
    with pytest.raises(KernelError):
        resolve_kernel("not_a_kernel")


def test_catalog_names():
    names = set(catalog())
    assert {"riesz2_12", "riesz4_1123", "odd_x1", "riesz2d_diff",
            "riesz2d_cross", "odd2d_x1"} <= names
