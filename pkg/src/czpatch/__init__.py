"""Singular integral operators on patch domains: evaluators and studies."""

from .geometry import (Atlas, Chart, DomainFamily, DomainNorms, GeometryError,
                       SamplingConfig, arc_chord_min, build_domain,
                       check_denominator_bound, normal, normal_tilde, norms)
from .kernels import (HomogeneousKernel, KernelError, MultiplierSpec,
                      catalog, divergence_antiderivative, get_kernel,
                      harmonic_decompose, kernel_eval, mean_zero_check,
                      multiplier_constant, parse_kernel_spec, radial_profile_G,
                      resolve_kernel)
from .polynomials import HomogeneousPolynomial

__all__ = [
    "Atlas", "Chart", "DomainFamily", "DomainNorms", "GeometryError",
    "SamplingConfig", "arc_chord_min", "build_domain", "check_denominator_bound",
    "normal", "normal_tilde", "norms",
    "HomogeneousKernel", "KernelError", "MultiplierSpec", "catalog",
    "divergence_antiderivative", "get_kernel", "harmonic_decompose",
    "kernel_eval", "mean_zero_check", "multiplier_constant",
    "parse_kernel_spec", "radial_profile_G", "resolve_kernel",
    "HomogeneousPolynomial",
]
