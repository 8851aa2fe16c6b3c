import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from czpatch.geometry import (Atlas, Chart, DomainFamily, GeometryError,
                              SamplingConfig, arc_chord_min, build_domain,
                              check_denominator_bound, normal, normal_tilde,
                              norms)

ALL_FAMILIES = [
    DomainFamily("sphere"),
    DomainFamily("ellipsoid", radii=(1.0, 1.0, 2.0)),
    DomainFamily("bumped_sphere", bump_amplitude=0.05, bump_frequency=3),
    DomainFamily("disk"),
    DomainFamily("bumped_disk", bump_amplitude=0.05, bump_frequency=3),
]


# ---------------------------------------------------------------------------
# chart invariants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: f.label())
def test_analytic_derivatives_match_central_differences(fam, rng):
    atlas = build_domain(fam)
    for ch in atlas.charts:
        a = ch.lo + (ch.hi - ch.lo) * rng.uniform(0.05, 0.95, size=(40, ch.pdim))
        d = ch.dZ(a)
        h = 1e-6 * ch.param_scale()
        for j in range(ch.pdim):
            e = np.zeros(ch.pdim)
            e[j] = h
            fd = (ch.Z(a + e) - ch.Z(a - e)) / (2 * h)
            assert_allclose(d[:, :, j], fd, rtol=1e-6, atol=1e-9)


def _spherical_chart():
    # (phi, theta) order so that N = d_phi Z ^ d_theta Z points inward
    def zfun(a):
        phi, th = a[:, 0], a[:, 1]
        return np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi),
                         np.cos(th)], axis=-1)

    return Chart(zfun, lo=(-1.0, 0.4), hi=(1.0, 2.7), name="spherical")


def test_normal_spherical_chart_at_equator():
    ch = _spherical_chart()
    n = normal(ch, np.array([0.0, math.pi / 2]))
    # symbolic cross product of the analytic derivatives: -sin(theta) * rhat
    assert_allclose(n, [-1.0, 0.0, 0.0], atol=1e-12)
    assert np.linalg.norm(n) == pytest.approx(1.0)  # = sin(theta)


def test_normal_flat_graph_chart_constant():
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], 0 * a[:, 0]]),
                 lo=(-1, -1), hi=(1, 1))
    n = normal(flat, np.array([0.3, -0.2]))
    assert_allclose(n, [0.0, 0.0, 1.0], atol=1e-14)


def test_normal_scaling_is_quadratic():
    c = 3.0
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], a[:, 0] * a[:, 1]]),
                 lo=(-1, -1), hi=(1, 1))
    scaled = Chart(lambda a: c * np.column_stack([a[:, 0], a[:, 1],
                                                  a[:, 0] * a[:, 1]]),
                   lo=(-1, -1), hi=(1, 1))
    al = np.array([0.4, 0.1])
    assert_allclose(normal(scaled, al), c**2 * normal(flat, al), rtol=1e-12)


def test_normal_outside_domain_raises():
    ch = _spherical_chart()
    with pytest.raises(GeometryError):
        normal(ch, np.array([5.0, 1.0]))


def test_normal_tilde_magnitudes():
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], 0 * a[:, 0]]),
                 lo=(-1, -1), hi=(1, 1))
    al = np.array([0.1, 0.2])
    assert_allclose(normal_tilde(flat, al), normal(flat, al), atol=1e-14)
    # |N| = 4 gives |Ntilde| = 2
    stretched = Chart(lambda a: np.column_stack([2 * a[:, 0], 2 * a[:, 1],
                                                 0 * a[:, 0]]),
                      lo=(-1, -1), hi=(1, 1))
    assert np.linalg.norm(normal_tilde(stretched, al)) == pytest.approx(2.0)
    sph = _spherical_chart()  # finite-difference dZ fallback path
    nt = normal_tilde(sph, np.array([0.0, math.pi / 2]))
    assert np.linalg.norm(nt) == pytest.approx(1.0, rel=1e-9)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def test_sphere_norms(ball, ball_norms):
    nm = ball_norms
    assert nm.area == pytest.approx(4 * math.pi, rel=1e-2)
    assert nm.star == pytest.approx(1.0 / nm.dz_inf, rel=1e-14)
    assert nm.star * nm.lip >= 1.0
    eta_expected = nm.eta / (4 * (1 + nm.star) * (1 + nm.lip))
    assert nm.eta_bar == pytest.approx(eta_expected, rel=1e-14)
    assert nm.reach_est == pytest.approx(1.0, rel=1e-6)
    base = (nm.dz_inf / (18 * nm.holder_1s)) ** (1 / nm.sigma)
    assert nm.delta_cut == pytest.approx(base * math.sqrt(nm.dz_inf / nm.lip) / 6)
    assert nm.far_cut == pytest.approx(base * math.sqrt(nm.lip / nm.dz_inf) / 6)


def test_disk_perimeter(disk, disk_norms):
    assert disk_norms.area == pytest.approx(2 * math.pi, rel=1e-3)


def test_bumped_zero_amplitude_matches_sphere(ball, rng):
    bumped0 = build_domain(DomainFamily("bumped_sphere", bump_amplitude=0.0))
    for ch0, ch1 in zip(ball.charts, bumped0.charts):
        a = ch0.lo + (ch0.hi - ch0.lo) * rng.uniform(size=(64, 2))
        assert_allclose(ch0.Z(a), ch1.Z(a), atol=1e-15)
        assert_allclose(ch0.dZ(a), ch1.dZ(a), atol=1e-15)


def test_holder_seminorm_nondecreasing_in_bump():
    cfg = SamplingConfig(points_per_chart=512, pairs_per_chart=4096)
    vals = []
    for eps in (0.0, 0.01, 0.02, 0.05):
        atlas = build_domain(DomainFamily("bumped_sphere", bump_amplitude=eps))
        vals.append(norms(atlas, 0.5, cfg).holder_1s)
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:])), vals


def test_norms_stable_under_sample_doubling(ball):
    a = norms(ball, 0.5, SamplingConfig(points_per_chart=1024, pairs_per_chart=8192))
    b = norms(ball, 0.5, SamplingConfig(points_per_chart=2048, pairs_per_chart=16384))
    for f in ("star", "lip", "holder_1s"):
        va, vb = getattr(a, f), getattr(b, f)
        assert abs(va - vb) <= 0.02 * max(va, vb), f


def test_normal_tilde_bound_chain(ball, ball_norms):
    nm = ball_norms
    rng = np.random.default_rng(3)
    for ch in ball.charts:
        a = ch.lo + (ch.hi - ch.lo) * rng.uniform(size=(200, 2))
        nt = normal_tilde(ch, a)
        mags = np.linalg.norm(nt, axis=1)
        assert np.all(mags <= nm.lip * (1 + 1e-9))
        lower = nm.star ** -1.5 * nm.lip ** -0.5
        assert np.all(mags >= lower * (1 - 1e-9))


def test_degenerate_chart_rejected():
    pinched = Chart(lambda a: np.column_stack(
        [a[:, 0] ** 3, a[:, 1], 0 * a[:, 0]]), lo=(-1, -1), hi=(1, 1))
    atlas = Atlas([pinched])
    with pytest.raises(GeometryError):
        norms(atlas, 0.5, SamplingConfig(points_per_chart=256, pairs_per_chart=512))


# ---------------------------------------------------------------------------
# arc-chord and the denominator bound
# ---------------------------------------------------------------------------

def test_arc_chord_flat_charts():
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], 0 * a[:, 0]]),
                 lo=(-1, -1), hi=(1, 1))
    assert arc_chord_min(flat, 4096) == pytest.approx(1.0, rel=1e-9)
    aniso = Chart(lambda a: np.column_stack([2 * a[:, 0], a[:, 1], 0 * a[:, 0]]),
                  lo=(-1, -1), hi=(1, 1))
    assert arc_chord_min(aniso, 4096) == pytest.approx(1.0, rel=1e-2)


def test_arc_chord_sphere_vs_brute_force(ball, rng):
    ch = ball.charts[0]
    got = arc_chord_min(ch, 65536)
    a = ch.lo + (ch.hi - ch.lo) * rng.uniform(size=(1000, 2))
    b = ch.lo + (ch.hi - ch.lo) * rng.uniform(size=(1000, 2))
    za, zb = ch.Z(a), ch.Z(b)
    # brute force over 10^6 pairs
    diff = np.linalg.norm(za[:, None, :] - zb[None, :, :], axis=-1)
    sep = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    mask = sep > 1e-9
    brute = float(np.min(diff[mask] / sep[mask]))
    assert got == pytest.approx(brute, rel=0.02)


def test_denominator_bound_flat_margin():
    flat = Chart(lambda a: np.column_stack([a[:, 0], a[:, 1], 0 * a[:, 0]]),
                 lo=(-1, -1), hi=(1, 1))
    atlas = Atlas([flat])
    nm = norms(atlas, 0.5, SamplingConfig(points_per_chart=256,
                                          pairs_per_chart=2048))
    rep = check_denominator_bound(flat, nm, n_triples=20000)
    assert rep.violations == 0
    assert rep.worst_margin >= 1.0 - 1e-9


@pytest.mark.parametrize("fixture", ["ball", "ellipsoid"])
def test_denominator_bound_no_violations(fixture, request):
    atlas = request.getfixturevalue(fixture)
    nm = request.getfixturevalue(f"{fixture}_norms" if fixture != "ellipsoid"
                                 else "ellipsoid_norms")
    for ch in atlas.charts:
        rep = check_denominator_bound(ch, nm, n_triples=20000)
        assert rep.violations == 0, rep.witness


# ---------------------------------------------------------------------------
# atlas-level checks
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: f.label())
def test_charts_cover_boundary(fam):
    atlas = build_domain(fam)
    pts = atlas.surface_samples(128)
    idx, alphas = atlas.covering_chart(pts)
    assert len(idx) == len(pts)


@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: f.label())
def test_orientation_volume_positive(fam):
    atlas = build_domain(fam)
    v = atlas.oriented_volume()
    assert v > 0
    if fam.family == "sphere":
        assert v == pytest.approx(4 * math.pi / 3, rel=1e-9)
    if fam.family == "ellipsoid":
        assert v == pytest.approx(4 * math.pi / 3 * 2.0, rel=1e-9)
    if fam.family == "disk":
        assert v == pytest.approx(math.pi, rel=1e-9)


def test_chart_overlap_fraction(ball):
    fracs = ball.overlap_fractions(512)
    assert all(f >= 0.10 for f in fracs.values())


def test_family_validation():
    with pytest.raises(GeometryError):
        build_domain(DomainFamily("ellipsoid", radii=(1.0, 2.0)))
    with pytest.raises(GeometryError):
        build_domain(DomainFamily("bumped_sphere", bump_amplitude=0.5,
                                  bump_frequency=4))
    with pytest.raises(GeometryError):
        build_domain(DomainFamily("torus"))


def test_fd_fallback_chart_derivative():
    analytic = Chart(lambda a: np.column_stack(
        [np.cos(a[:, 0]), np.sin(a[:, 0]), a[:, 1]]), lo=(0, -1), hi=(2, 1))
    d = analytic.dZ(np.array([[0.7, 0.2]]))
    expect = np.array([[[-math.sin(0.7), 0.0], [math.cos(0.7), 0.0], [0.0, 1.0]]])
    assert_allclose(d, expect, atol=1e-9)
