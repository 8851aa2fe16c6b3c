"""Patch domains: chart atlases, shipped families, and geometric norms.

A domain is described by an atlas of injective charts Z: V -> R^n whose
normal N = d1Z ^ d2Z points toward the interior (rotated tangent in the
plane).  Shipped sphere-like families additionally carry a star-shaped
implicit description (radial graph about the center) used by the volume
evaluator for exact ray casting.

Sphere-like 3D atlases use six overlapping cube-face charts whose
integration tiles partition the surface exactly; closed curves use two
overlapping arcs.  This keeps |d_alpha Z| bounded away from zero on every
chart and avoids partition-of-unity weights in surface quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

class Chart:
    """Single parametrized boundary patch.

    ``zfun``/``dzfun`` are vectorized: alpha has shape (N, pdim), zfun
    returns (N, n) and dzfun (N, n, pdim).  When no analytic derivative is
    supplied, a 4th-order central difference with step 1e-5 * (parameter
    scale) is used.
    """

    def __init__(self, zfun: Callable, lo, hi, tile_lo=None, tile_hi=None,
                 dzfun: Callable | None = None, name: str = ""):
        self.lo = np.atleast_1d(np.asarray(lo, float))
        self.hi = np.atleast_1d(np.asarray(hi, float))
        self.pdim = self.lo.size
        self.tile_lo = self.lo if tile_lo is None else np.atleast_1d(np.asarray(tile_lo, float))
        self.tile_hi = self.hi if tile_hi is None else np.atleast_1d(np.asarray(tile_hi, float))
        self._zfun = zfun
        self._dzfun = dzfun
        self.name = name
        probe = self.Z(self.lo[None, :])
        self.ndim = probe.shape[-1]

    def Z(self, alpha) -> np.ndarray:
        a = np.atleast_2d(np.asarray(alpha, float))
        return self._zfun(a)

    def dZ(self, alpha) -> np.ndarray:
        a = np.atleast_2d(np.asarray(alpha, float))
        if self._dzfun is not None:
            return self._dzfun(a)
        return self._fd_dz(a)

    def _fd_dz(self, a: np.ndarray) -> np.ndarray:
        scale = float(np.max(self.hi - self.lo))
        h = 1e-5 * scale
        cols = []
        for j in range(self.pdim):
            e = np.zeros(self.pdim)
            e[j] = 1.0
            z1 = self._zfun(a + h * e)
            z_1 = self._zfun(a - h * e)
            z2 = self._zfun(a + 2 * h * e)
            z_2 = self._zfun(a - 2 * h * e)
            cols.append((8.0 * (z1 - z_1) - (z2 - z_2)) / (12.0 * h))
        return np.stack(cols, axis=-1)

    def contains_param(self, alpha, slack: float = 0.0) -> np.ndarray:
        a = np.atleast_2d(np.asarray(alpha, float))
        return np.all((a >= self.lo - slack) & (a <= self.hi + slack), axis=1)

    def require_param(self, alpha) -> None:
        if not np.all(self.contains_param(alpha, slack=1e-12)):
            raise GeometryError(f"parameter outside chart {self.name!r} domain")

    def param_scale(self) -> float:
        return float(np.max(self.hi - self.lo))


def normal(chart: Chart, alpha) -> np.ndarray:
    """Interior-pointing normal N = d1Z ^ d2Z (rotated tangent for curves)."""
    chart.require_param(alpha)
    d = chart.dZ(alpha)
    if chart.pdim == 2:
        n = np.cross(d[..., 0], d[..., 1])
    else:
        t = d[..., 0]
        n = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    return n[0] if np.asarray(alpha).ndim == 1 else n


def normal_unchecked(chart: Chart, alpha) -> np.ndarray:
    d = chart.dZ(alpha)
    if chart.pdim == 2:
        return np.cross(d[..., 0], d[..., 1])
    t = d[..., 0]
    return np.stack([-t[..., 1], t[..., 0]], axis=-1)


def normal_tilde(chart: Chart, alpha) -> np.ndarray:
    """N / sqrt(|N|), the half-normalized normal of the near-boundary frame."""
    n = normal(chart, alpha)
    mag = np.linalg.norm(np.atleast_2d(n), axis=-1)
    if np.any(mag < 1e-14):
        raise GeometryError("degenerate chart: N = 0")
    out = np.atleast_2d(n) / np.sqrt(mag)[:, None]
    return out[0] if np.asarray(alpha).ndim == 1 else out


# ---------------------------------------------------------------------------
# shipped families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainFamily:
    """Parametric test-domain description."""

    family: str  # sphere | ellipsoid | bumped_sphere | disk | bumped_disk
    radius: float = 1.0
    radii: tuple[float, ...] = ()
    bump_amplitude: float = 0.0
    bump_frequency: int = 3

    def label(self) -> str:
        if self.family == "ellipsoid":
            return f"ellipsoid{self.radii}"
        if self.family in ("bumped_sphere", "bumped_disk") and self.bump_amplitude:
            return f"{self.family}(eps={self.bump_amplitude},m={self.bump_frequency})"
        return f"{self.family}(R={self.radius})"


class StarShape:
    """Star-shaped implicit geometry: boundary = { r(u) u : |u| = 1 }."""

    def __init__(self, ndim: int, radial: Callable, center=None):
        self.ndim = ndim
        self.radial = radial  # unit directions (N, n) -> radii (N,)
        self.center = np.zeros(ndim) if center is None else np.asarray(center, float)

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, float)) - self.center
        r = np.linalg.norm(p, axis=-1)
        out = np.zeros(p.shape[0], dtype=bool)
        nz = r > 0
        u = p[nz] / r[nz, None]
        out[nz] = r[nz] <= self.radial(u)
        out[~nz] = True
        return out

    def signed_radial_excess(self, pts) -> np.ndarray:
        """|p - c| - r(u): negative inside, positive outside."""
        p = np.atleast_2d(np.asarray(pts, float)) - self.center
        r = np.linalg.norm(p, axis=-1)
        u = np.where(r[:, None] > 0, p / np.maximum(r, 1e-300)[:, None], 0.0)
        u[r == 0, -1] = 1.0
        return r - self.radial(u)


def attach_quadratic_cast(star: StarShape, radii) -> None:
    """Closed-form ray chords for ellipsoidal shapes |diag(1/a)(x-c)| = 1."""
    inv = 1.0 / np.asarray(radii, float)

    def roots(x, V):
        p = (x - star.center) * inv
        W = V * inv[None, :]
        A = np.sum(W * W, axis=1)
        B = W @ p
        C = p @ p - 1.0
        disc = B * B - A * C
        crosses = disc > 0
        sq = np.sqrt(np.where(crosses, disc, 0.0))
        return (-B - sq) / A, (-B + sq) / A, crosses

    def cast(x, V):
        t_lo, t_hi, crosses = roots(x, V)
        hit = crosses & (t_lo > 0)
        return (np.where(hit, t_lo, np.nan), np.where(hit, t_hi, np.nan), hit)

    star.quadratic_cast = cast
    star.quadratic_roots = roots


def _bump_value_grad(w: np.ndarray, freq: int):
    """Real part of (w1 + i w2)^freq on the sphere and its ambient gradient."""
    z = w[..., 0] + 1j * w[..., 1]
    zf = z ** freq
    zf1 = freq * z ** (freq - 1) if freq >= 1 else np.zeros_like(z)
    val = zf.real
    grad = np.zeros_like(w)
    grad[..., 0] = zf1.real
    grad[..., 1] = -zf1.imag
    return val, grad


def _cube_faces():
    faces = []
    eye = np.eye(3)
    for k in range(3):
        for s in (+1.0, -1.0):
            c = s * eye[k]
            u = eye[(k + 1) % 3]
            v = eye[(k + 2) % 3]
            if s > 0:  # choose u x v = -c so that N points inward
                u, v = v, u
            faces.append((c, u, v))
    return faces


_CUBE_OVERLAP = 1.15  # evaluation domain half-width; tiles are [-1, 1]^2


def _make_sphere_like_chart(face, surf, dsurf, name):
    c, u, v = face

    def zfun(a):
        q = c[None, :] + a[:, 0:1] * u[None, :] + a[:, 1:2] * v[None, :]
        nq = np.linalg.norm(q, axis=1, keepdims=True)
        w = q / nq
        return surf(w)

    def dzfun(a):
        q = c[None, :] + a[:, 0:1] * u[None, :] + a[:, 1:2] * v[None, :]
        nq = np.linalg.norm(q, axis=1, keepdims=True)
        w = q / nq
        # dw/dalpha_j = (I - w w^T) e_j / |q|
        dw = np.empty((a.shape[0], 3, 2))
        for j, e in enumerate((u, v)):
            proj = e[None, :] - w * (w @ e)[:, None]
            dw[:, :, j] = proj / nq
        return dsurf(w, dw)

    a = _CUBE_OVERLAP
    return Chart(zfun, lo=(-a, -a), hi=(a, a), tile_lo=(-1.0, -1.0),
                 tile_hi=(1.0, 1.0), dzfun=dzfun, name=name)


def _sphere_like_atlas(fam: DomainFamily) -> "Atlas":
    R = fam.radius
    eps = fam.bump_amplitude
    freq = fam.bump_frequency
    if fam.family == "ellipsoid":
        radii = np.asarray(fam.radii if fam.radii else (R, R, R), float)
        if radii.size != 3 or np.any(radii <= 0):
            raise GeometryError("ellipsoid needs three positive radii")

        def surf(w):
            return w * radii[None, :]

        def dsurf(w, dw):
            return dw * radii[None, :, None]

        def radial(u):
            return 1.0 / np.linalg.norm(u / radii[None, :], axis=-1)

        def wdir(y):
            q = y / radii[None, :]
            return q / np.linalg.norm(q, axis=-1, keepdims=True)
    else:
        if fam.family == "bumped_sphere" and abs(eps) * (2 + freq**2) >= 0.95:
            raise GeometryError("bump amplitude too large: domain may lose convexity")

        def rho(w):
            if eps == 0.0:
                return np.full(w.shape[:-1], R)
            val, _ = _bump_value_grad(w, freq)
            return R * (1.0 + eps * val)

        def surf(w):
            return rho(w)[..., None] * w

        def dsurf(w, dw):
            if eps == 0.0:
                return R * dw
            val, grad = _bump_value_grad(w, freq)
            r = R * (1.0 + eps * val)
            dr = R * eps * np.einsum("ni,nij->nj", grad, dw)
            return r[:, None, None] * dw + w[:, :, None] * dr[:, None, :]

        def radial(u):
            return rho(u)

        def wdir(y):
            return y / np.linalg.norm(y, axis=-1, keepdims=True)

    charts = [_make_sphere_like_chart(face, surf, dsurf, name=f"face{i}")
              for i, face in enumerate(_cube_faces())]
    faces = _cube_faces()

    def invert(pts):
        y = np.atleast_2d(np.asarray(pts, float))
        w = wdir(y)
        cs = np.stack([f[0] for f in faces])  # (6, 3)
        dots = w @ cs.T
        idx = np.argmax(dots, axis=1)
        alphas = np.empty((y.shape[0], 2))
        for i in range(len(faces)):
            sel = idx == i
            if not np.any(sel):
                continue
            c, u, v = faces[i]
            d = w[sel] @ c
            alphas[sel, 0] = (w[sel] @ u) / d
            alphas[sel, 1] = (w[sel] @ v) / d
        return idx, alphas

    star = StarShape(3, radial)
    if fam.family == "ellipsoid":
        attach_quadratic_cast(star, fam.radii if fam.radii else (R, R, R))
    elif eps == 0.0:
        attach_quadratic_cast(star, (R, R, R))
    return Atlas(charts, implicit=star, family=fam, invert_fn=invert)


def _circle_like_atlas(fam: DomainFamily) -> "Atlas":
    R = fam.radius
    eps = fam.bump_amplitude if fam.family == "bumped_disk" else 0.0
    freq = fam.bump_frequency
    if abs(eps) * (2 + freq**2) >= 0.95:
        raise GeometryError("bump amplitude too large for a convex curve")

    def r_of(t):
        return R * (1.0 + eps * np.cos(freq * t))

    def dr_of(t):
        return -R * eps * freq * np.sin(freq * t)

    def zfun(a):
        t = a[:, 0]
        r = r_of(t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def dzfun(a):
        t = a[:, 0]
        r, dr = r_of(t), dr_of(t)
        dx = dr * np.cos(t) - r * np.sin(t)
        dy = dr * np.sin(t) + r * np.cos(t)
        return np.stack([dx, dy], axis=-1)[:, :, None]

    pad = 0.35 * np.pi
    charts = [
        Chart(zfun, lo=(-pad,), hi=(np.pi + pad,), tile_lo=(0.0,),
              tile_hi=(np.pi,), dzfun=dzfun, name="arc0"),
        Chart(zfun, lo=(np.pi - pad,), hi=(2 * np.pi + pad,), tile_lo=(np.pi,),
              tile_hi=(2 * np.pi,), dzfun=dzfun, name="arc1"),
    ]

    def radial(u):
        t = np.arctan2(u[..., 1], u[..., 0])
        return r_of(t)

    def invert(pts):
        y = np.atleast_2d(np.asarray(pts, float))
        t = np.mod(np.arctan2(y[:, 1], y[:, 0]), 2 * np.pi)
        idx = (t >= np.pi).astype(int)
        return idx, t[:, None]

    star = StarShape(2, radial)
    if eps == 0.0:
        attach_quadratic_cast(star, (R, R))
    return Atlas(charts, implicit=star, family=fam, invert_fn=invert)


def build_domain(fam: DomainFamily) -> "Atlas":
    if fam.family in ("sphere", "ellipsoid", "bumped_sphere"):
        return _sphere_like_atlas(fam)
    if fam.family in ("disk", "bumped_disk"):
        return _circle_like_atlas(fam)
    raise GeometryError(f"unknown family {fam.family!r}")


# ---------------------------------------------------------------------------
# atlas
# ---------------------------------------------------------------------------

class Atlas:
    """Collection of charts covering a closed boundary, oriented inward."""

    def __init__(self, charts: Sequence[Chart], implicit: StarShape | None = None,
                 family: DomainFamily | None = None, invert_fn: Callable | None = None):
        if not charts:
            raise GeometryError("atlas needs at least one chart")
        self.charts = list(charts)
        self.ndim = charts[0].ndim
        self.pdim = charts[0].pdim
        self.implicit = implicit
        self.family = family
        self._invert = invert_fn
        self._diam: float | None = None

    # -- point membership / location ------------------------------------

    def contains(self, pts) -> np.ndarray:
        if self.implicit is None:
            raise GeometryError("atlas has no implicit geometry for membership tests")
        return self.implicit.contains(pts)

    def side(self, pts) -> np.ndarray:
        """+1 strictly inside, -1 strictly outside (by the implicit shape)."""
        return np.where(self.contains(pts), 1, -1)

    def invert(self, pts):
        """Locate surface point(s): chart indices and parameters."""
        if self._invert is None:
            raise GeometryError("atlas does not support chart inversion")
        return self._invert(pts)

    def covering_chart(self, pts):
        idx, alphas = self.invert(pts)
        for i, ch in enumerate(self.charts):
            sel = idx == i
            if np.any(sel) and not np.all(ch.contains_param(alphas[sel], slack=1e-9)):
                raise GeometryError("surface point not covered by its chart")
        return idx, alphas

    # -- sampling ---------------------------------------------------------

    def surface_samples(self, count_per_chart: int) -> np.ndarray:
        pts = []
        for i, ch in enumerate(self.charts):
            h = qmc.Halton(d=ch.pdim, scramble=False, seed=7)
            a = ch.tile_lo + (ch.tile_hi - ch.tile_lo) * h.random(count_per_chart)
            pts.append(ch.Z(a))
        return np.concatenate(pts, axis=0)

    def diam(self) -> float:
        if self._diam is None:
            pts = self.surface_samples(256)
            # far-apart pair by double sweep from extremes
            d = 0.0
            for axis_pt in (pts[np.argmin(pts[:, 0])], pts[np.argmax(pts[:, 0])]):
                d = max(d, float(np.max(np.linalg.norm(pts - axis_pt, axis=1))))
            self._diam = d
        return self._diam

    def interior_point(self) -> np.ndarray:
        if self.implicit is not None:
            return self.implicit.center.copy()
        raise GeometryError("no interior point available")

    def oriented_volume(self) -> float:
        """Divergence-theorem volume; positive iff normals point inward."""
        n = self.ndim
        total = 0.0
        for ch in self.charts:
            a, w = _tile_gauss(ch, 24)
            z = ch.Z(a)
            nn = normal_unchecked(ch, a)
            total += float(np.sum(np.sum(z * nn, axis=1) * w))
        return -total / n

    def overlap_fractions(self, samples: int = 512) -> dict[int, float]:
        """Fraction of each chart's eval-domain area shared with other charts."""
        out = {}
        for i, ch in enumerate(self.charts):
            h = qmc.Halton(d=ch.pdim, scramble=False, seed=11)
            a = ch.lo + (ch.hi - ch.lo) * h.random(samples)
            pts = ch.Z(a)
            idx, al = self.invert(pts)
            covered_elsewhere = np.zeros(samples, dtype=bool)
            for j, other in enumerate(self.charts):
                if j == i:
                    continue
                sel = idx == j
                covered_elsewhere |= sel & other.contains_param(al, slack=0.0)
            # overlap also counts this chart's own points that map to another tile
            out[i] = float(np.mean(covered_elsewhere | (idx != i)))
        return out


def _tile_gauss(chart: Chart, order: int):
    """Tensor Gauss-Legendre nodes/weights on the chart's integration tile."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    axes = []
    wts = []
    for j in range(chart.pdim):
        lo, hi = chart.tile_lo[j], chart.tile_hi[j]
        axes.append(0.5 * (hi + lo) + 0.5 * (hi - lo) * xg)
        wts.append(0.5 * (hi - lo) * wg)
    if chart.pdim == 1:
        return axes[0][:, None], wts[0]
    A1, A2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    W = np.outer(wts[0], wts[1])
    return np.stack([A1.ravel(), A2.ravel()], axis=-1), W.ravel()


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass
class SamplingConfig:
    points_per_chart: int = 4096
    pairs_per_chart: int = 65536
    eta: float | None = None  # override the automatic boundary cutoff radius


@dataclass
class DomainNorms:
    """Geometric norms of the atlas and derived cutoff constants."""

    star: float
    lip: float
    holder_1s: float
    sigma: float
    dz_inf: float
    area: float
    eta: float
    eta_bar: float
    delta_cut: float
    far_cut: float
    reach_est: float = math.nan
    diam: float = math.nan
    per_chart: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("star", "lip", "holder_1s", "sigma", "dz_inf", "area",
                 "eta", "eta_bar", "delta_cut", "far_cut", "reach_est", "diam")}


def _halton_points(chart: Chart, n: int, dims: int, seed: int) -> np.ndarray:
    h = qmc.Halton(d=dims, scramble=False, seed=seed)
    u = h.random(n)
    p = chart.pdim
    lo = np.tile(chart.lo, dims // p)
    hi = np.tile(chart.hi, dims // p)
    return lo + (hi - lo) * u


def _grid_chord_min(chart: Chart, per_axis: int) -> float:
    """Pairwise chord minimum over a deterministic parameter grid (catches
    the corner-dominated infima that random pairs undersample)."""
    axes = [np.linspace(chart.lo[j], chart.hi[j], per_axis)
            for j in range(chart.pdim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, chart.pdim)
    z = chart.Z(mesh)
    best = math.inf
    step = 256
    for i in range(0, len(mesh), step):
        sep = np.linalg.norm(mesh[i:i + step, None, :] - mesh[None, :, :], axis=-1)
        dz = np.linalg.norm(z[i:i + step, None, :] - z[None, :, :], axis=-1)
        mask = sep > 1e-9 * chart.param_scale()
        if np.any(mask):
            best = min(best, float(np.min(dz[mask] / sep[mask])))
    return best


def arc_chord_min(chart: Chart, n_pairs: int = 65536) -> float:
    """min over sampled pairs of |Z(a)-Z(b)|/|a-b| and directional |d_j Z| infima."""
    if n_pairs < 2:
        raise GeometryError("need at least 2 sample points")
    ab = _halton_points(chart, n_pairs, 2 * chart.pdim, seed=23)
    a, b = ab[:, :chart.pdim], ab[:, chart.pdim:]
    sep = np.linalg.norm(a - b, axis=1)
    keep = sep > 1e-9 * chart.param_scale()
    quot = np.linalg.norm(chart.Z(a[keep]) - chart.Z(b[keep]), axis=1) / sep[keep]
    d = chart.dZ(a[: max(n_pairs // 16, 64)])
    dir_inf = float(np.min(np.linalg.norm(d, axis=1)))
    grid = _grid_chord_min(chart, 25 if chart.pdim == 2 else 257)
    return float(min(np.min(quot), dir_inf, grid))


def norms(atlas: Atlas, sigma: float, sampling: SamplingConfig | None = None) -> DomainNorms:
    """Estimate the atlas norms and the derived cutoff constants.

    Sup/inf-type quantities are taken over nested low-discrepancy samples of
    parameter points and pairs per chart, so refining the sample can only
    sharpen them.
    """
    if not (0.0 < sigma < 1.0):
        raise GeometryError(f"sigma must be in (0,1), got {sigma}")
    cfg = sampling or SamplingConfig()
    lip = 0.0
    dz_inf = math.inf
    holder = 0.0
    per_chart = {}
    reach = math.inf
    area = 0.0
    all_pts = []
    all_nrm = []
    for ci, ch in enumerate(atlas.charts):
        pts = _halton_points(ch, cfg.points_per_chart, ch.pdim, seed=5)
        d = ch.dZ(pts)  # (N, n, pdim)
        dir_mags = np.linalg.norm(d, axis=1)  # (N, pdim)
        if ch.pdim == 2:
            svals = np.linalg.svd(d, compute_uv=False)
            smax = float(np.max(svals))
        else:
            smax = float(np.max(dir_mags))
        dir_inf = float(np.min(dir_mags))
        if dir_inf < 1e-12:
            raise GeometryError(f"degenerate chart {ch.name!r}: |d_alpha Z| -> 0")
        ab = _halton_points(ch, cfg.pairs_per_chart, 2 * ch.pdim, seed=23)
        a, b = ab[:, :ch.pdim], ab[:, ch.pdim:]
        sep = np.linalg.norm(a - b, axis=1)
        keep = sep > 1e-9 * ch.param_scale()
        a, b, sep = a[keep], b[keep], sep[keep]
        za, zb = ch.Z(a), ch.Z(b)
        chord = np.linalg.norm(za - zb, axis=1) / sep
        da, db = ch.dZ(a), ch.dZ(b)
        hold = np.linalg.norm((da - db).reshape(len(a), -1), axis=1) / sep**sigma
        chart_lip = max(smax, float(np.max(chord)))
        chart_inf = min(dir_inf, float(np.min(chord)),
                        _grid_chord_min(ch, 25 if ch.pdim == 2 else 257))
        chart_holder = float(np.max(hold))
        per_chart[ci] = {"lip": chart_lip, "dz_inf": chart_inf,
                         "holder": chart_holder, "name": ch.name}
        lip = max(lip, chart_lip)
        dz_inf = min(dz_inf, chart_inf)
        holder = max(holder, chart_holder)
        qa, qw = _tile_gauss(ch, 24)
        nn = normal_unchecked(ch, qa)
        area += float(np.sum(np.linalg.norm(nn, axis=1) * qw))
        sub = pts[: min(len(pts), 512)]
        all_pts.append(ch.Z(sub))
        nrm = normal_unchecked(ch, sub)
        all_nrm.append(nrm / np.linalg.norm(nrm, axis=1, keepdims=True))
    pts = np.concatenate(all_pts)
    nrms = np.concatenate(all_nrm)
    diam = 0.0
    for anchor in (pts[np.argmin(pts[:, 0])], pts[np.argmax(pts[:, 0])]):
        diam = max(diam, float(np.max(np.linalg.norm(pts - anchor, axis=1))))
    # osculating-sphere reach estimate: |y1-y2|^2 / (2 |(y1-y2).nu(y2)|)
    stride = max(len(pts) // 384, 1)
    sub = pts[::stride]
    subn = nrms[::stride]
    dvec = sub[None, :, :] - sub[:, None, :]
    dist2 = np.sum(dvec**2, axis=-1)
    height = np.abs(np.einsum("ijk,jk->ij", dvec, subn))
    mask = (dist2 > (1e-4 * diam) ** 2) & (height > 1e-12 * diam)
    if np.any(mask):
        reach = float(np.min(dist2[mask] / (2.0 * height[mask])))
    star = 1.0 / dz_inf
    eta = cfg.eta if cfg.eta is not None else min(0.25 * reach, 0.2 * diam)
    eta_bar = eta / (4.0 * (1.0 + star) * (1.0 + lip))
    base = (dz_inf / (18.0 * holder)) ** (1.0 / sigma) if holder > 0 else math.inf
    delta_cut = base * math.sqrt(dz_inf / lip) / 6.0
    far_cut = base * math.sqrt(lip / dz_inf) / 6.0
    return DomainNorms(star=star, lip=lip, holder_1s=holder, sigma=sigma,
                       dz_inf=dz_inf, area=area, eta=eta, eta_bar=eta_bar,
                       delta_cut=delta_cut, far_cut=far_cut, reach_est=reach,
                       diam=diam, per_chart=per_chart)


@dataclass
class DenominatorReport:
    checked: int
    violations: int
    worst_margin: float
    witness: tuple | None


def check_denominator_bound(chart: Chart, nm: DomainNorms,
                            n_triples: int = 100000) -> DenominatorReport:
    """Verify |dZ(xi) (a-g)| >= |a-g| / (star^2 lip) on sampled triples."""
    p = chart.pdim
    tri = _halton_points(chart, n_triples, 3 * p, seed=41)
    xi, a, g = tri[:, :p], tri[:, p:2 * p], tri[:, 2 * p:]
    vec = a - g
    sep = np.linalg.norm(vec, axis=1)
    keep = sep > 1e-9 * chart.param_scale()
    xi, vec, sep = xi[keep], vec[keep], sep[keep]
    d = chart.dZ(xi)  # (N, n, p)
    lhs = np.linalg.norm(np.einsum("nij,nj->ni", d, vec), axis=1)
    bound = sep / (nm.star**2 * nm.lip)
    margin = lhs * nm.star**2 * nm.lip / sep
    bad = lhs < bound * (1.0 - 1e-12)
    worst = int(np.argmin(margin))
    witness = None
    if np.any(bad):
        i = int(np.argmin(margin))
        witness = (xi[i].copy(), vec[i].copy(), float(lhs[i]), float(bound[i]))
    return DenominatorReport(checked=int(len(sep)), violations=int(np.sum(bad)),
                             worst_margin=float(margin[worst]), witness=witness)
