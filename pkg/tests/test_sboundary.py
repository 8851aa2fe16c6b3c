import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from czpatch.geometry import Atlas, Chart
from czpatch.kernels import KernelError, get_kernel
from czpatch.sboundary import (BoundaryDensity, SurfaceQuadConfig,
                               antiderivative_components, one_sided_limits,
                               pv_on_boundary, s_eval, surface_nodes,
                               t_from_boundary)
from czpatch.svolume import t_volume_pv

ODD_A0 = antiderivative_components(get_kernel("riesz2_12"))[0]


def test_surface_nodes_integrate_area(ball):
    nodes = surface_nodes(ball)
    area = float(np.sum(np.linalg.norm(nodes.normals, axis=1) * nodes.weights))
    assert area == pytest.approx(4 * math.pi, rel=1e-8)


def test_s_eval_rejects_even_kernels(ball):
    with pytest.raises(KernelError):
        s_eval(get_kernel("riesz2_12"), ball, BoundaryDensity.constant(1.0),
               np.array([0.0, 0.0, 0.0]))


def test_s_eval_antipodal_cancellation_at_center(ball):
    v = s_eval(ODD_A0, ball, BoundaryDensity.constant(1.0), np.zeros(3))
    assert abs(v) <= 1e-8


def test_s_eval_zero_density_exact(ball):
    v = s_eval(ODD_A0, ball, BoundaryDensity.constant(0.0),
               np.array([0.2, 0.1, 0.4]))
    assert v == 0.0


def test_density_pullback_bound(ball, ball_norms):
    # ||g||_inf <= ||dZ||_inf^2 ||f||_inf with g = f |N|
    nodes = surface_nodes(ball)
    f = BoundaryDensity.from_point_function(lambda p: np.cos(3 * p[:, 0]))
    fv = f.eval(nodes.points, nodes.normals, nodes.chart_idx, nodes.alphas)
    g = fv * np.linalg.norm(nodes.normals, axis=1)
    assert np.max(np.abs(g)) <= ball_norms.lip**2 * np.max(np.abs(fv)) + 1e-12


def test_golden_sign_against_exterior_potential(ball):
    # frozen orientation check: T_11(1_B) at (1.5, 0, 0)
    x = np.array([1.5, 0.0, 0.0])
    exact = (4 * math.pi / 3) * (3 * x[0] ** 2 - x @ x) / (3 * np.linalg.norm(x) ** 5)
    got = t_from_boundary(get_kernel("riesz2_11"), ball, x)
    assert got == pytest.approx(exact, rel=1e-8)
    assert got > 0  # sign pinned: inward normals, no extra flip


def test_volume_boundary_agreement_ellipsoid_riesz4(ellipsoid, rng):
    k = get_kernel("riesz4_1123")
    star = ellipsoid.implicit
    probes = []
    while len(probes) < 5:  # interior, distance > 0.1 diam
        x = rng.uniform(-0.8, 0.8, size=3) * np.array([1, 1, 2])
        if star.signed_radial_excess(x[None, :])[0] < -0.45:
            probes.append(x)
    while len(probes) < 10:  # exterior
        x = rng.uniform(-1.0, 1.0, size=3) * np.array([2.2, 2.2, 3.2])
        if star.signed_radial_excess(x[None, :])[0] > 0.45:
            probes.append(x)
    vol = np.array([t_volume_pv(k, ellipsoid, x).value for x in probes])
    bnd = np.array([t_from_boundary(k, ellipsoid, x) for x in probes])
    floor = 1e-9 + 0.05 * np.max(np.abs(vol))
    rel = np.abs(bnd - vol) / np.maximum(np.abs(vol), floor)
    assert np.max(rel) <= 1e-3


def test_ball_center_zero(ball):
    v = t_from_boundary(get_kernel("riesz2_12"), ball, np.zeros(3))
    assert abs(v) <= 1e-8


def test_far_field_decay_exponent(ball):
    k = get_kernel("riesz2_11")
    diam = 2.0
    dists = np.array([5.0, 10.0, 20.0, 50.0]) * diam
    u = np.array([0.7, 0.5, 0.2])
    u /= np.linalg.norm(u)
    vals = np.abs([t_from_boundary(k, ball, d * u) for d in dists])
    slope, _ = np.polyfit(np.log(dists), np.log(vals), 1)
    assert slope == pytest.approx(-3.0, abs=0.1)


def test_pv_flat_disk_odd_kernel_exact_cancellation():
    # open flat chart centered at the foot point: odd kernel + constant
    # density cancel on every symmetric exclusion ring
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], 0 * a[:, 0]]),
                 lo=(-1, -1), hi=(1, 1))
    atlas = Atlas([flat])
    res = pv_on_boundary(ODD_A0, atlas, BoundaryDensity.constant(1.0),
                         chart=0, alpha=np.zeros(2), eta=0.5)
    assert np.max(np.abs(res.series)) <= 1e-10
    assert abs(res.value) <= 1e-10


def test_pv_series_cauchy_on_sphere(ball):
    u = np.array([0.6, 0.64, 0.48])
    u /= np.linalg.norm(u)
    ci, al = ball.invert(u[None, :])
    res = pv_on_boundary(ODD_A0, ball, BoundaryDensity.normal_component(0),
                         int(ci[0]), al[0], eta=0.3)
    diffs = np.abs(np.diff(res.series))
    ratios = diffs[1:] / diffs[:-1]
    assert np.all(ratios <= 0.75)  # halving eps at least ~halves the update


def test_pv_self_convergence_under_refinement(bumped):
    u = np.array([0.5, 0.5, 0.7])
    u /= np.linalg.norm(u)
    ci, al = bumped.invert(u[None, :])
    f = BoundaryDensity.normal_component(0)
    base = pv_on_boundary(ODD_A0, bumped, f, int(ci[0]), al[0], eta=0.3)
    fine = pv_on_boundary(ODD_A0, bumped, f, int(ci[0]), al[0], eta=0.3,
                          cfg=SurfaceQuadConfig(base_panels=12, panel_order=5,
                                                theta_refine=0.25))
    assert base.value == pytest.approx(fine.value, abs=1e-4)


def test_one_sided_limits_converge_and_jump_reported(ball):
    k = get_kernel("riesz2_12")
    u = np.array([0.48, 0.6, 0.64])
    u /= np.linalg.norm(u)
    ci, al = ball.invert(u[None, :])
    deltas = [1e-1, 1e-2, 1e-3]
    inner, outer = one_sided_limits(k, ball, int(ci[0]), al[0], deltas)
    # successive differences must shrink on both sides
    assert abs(inner[2] - inner[1]) <= abs(inner[1] - inner[0]) + 1e-12
    assert abs(outer[2] - outer[1]) <= abs(outer[1] - outer[0]) + 1e-12
    jump = outer[-1] - inner[-1]
    # pv value sits between the one-sided limits (measured, not asserted
    # as a formula)
    x = ball.charts[int(ci[0])].Z(al[0][None, :])[0]
    pv = t_from_boundary(k, ball, x)
    lo, hi = min(inner[-1], outer[-1]), max(inner[-1], outer[-1])
    assert lo - 0.05 * abs(jump) <= pv <= hi + 0.05 * abs(jump)


def test_boundary_route_matches_volume_near_boundary(bumped):
    k = get_kernel("riesz2_12")
    u = np.array([0.6, 0.48, 0.64])
    u /= np.linalg.norm(u)
    rb = bumped.implicit.radial(u[None, :])[0]
    for d in (1e-2, 1e-3):
        x = (rb - d) * u
        tb = t_from_boundary(k, bumped, x)
        tv = t_volume_pv(k, bumped, x).value
        assert tb == pytest.approx(tv, abs=5e-7)
