"""Principal-value volume evaluation of T(1_D) and an FFT multiplier oracle.

For a kernel of homogeneity -n the radial integral along each ray from the
evaluation point collapses to a chord-length logarithm, so the epsilon-shell
integrals of the pv schedule are computed exactly in the radial variable:

    int_{D \\ B(x,eps)} K(x-y) dy
        = int_{S^{n-1}} Omega(-v) [log t_out(v) - log max(t_in(v), eps)]_+ dsigma(v)

with (t_in, t_out) the entry/exit chord of the ray x + t v (t_in = 0 inside).
The direction integral uses composite Gauss-Legendre panels in the polar
cosine, dyadically graded toward the horizon/silhouette ring where the chord
lengths transition, and a trapezoid rule in azimuth.

The FFT oracle is an independent route: it rasterizes the indicator on a
periodic grid and applies the exact Fourier multiplier of the kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Atlas, GeometryError, StarShape
from .kernels import HomogeneousKernel, KernelError, multiplier_constant
from .normalcoords import nearest_boundary_point


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, series=None):
        super().__init__(msg)
        self.series = series


# ---------------------------------------------------------------------------
# schedules and results
# ---------------------------------------------------------------------------

@dataclass
class PvSchedule:
    """Geometric exclusion-radius sequence eps_k = eps0 * ratio^k."""

    eps0: float | None = None  # None: 0.1 * dist(x, boundary) (or domain scale)
    count: int = 7
    ratio: float = 0.5
    extrapolation_order: int = 2

    def radii(self, scale: float) -> np.ndarray:
        e0 = self.eps0 if self.eps0 is not None else 0.1 * scale
        eps = e0 * self.ratio ** np.arange(self.count)
        if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("pv schedule must be positive and strictly decreasing")
        return eps


@dataclass
class QuadConfig:
    base_panels: int = 12
    panel_order: int = 8
    n_phi: int = 96
    band_panels: int = 24
    min_width_floor: float = 1e-12
    silhouette_phi: int = 24


@dataclass
class PvResult:
    value: float
    err_est: float
    eps: np.ndarray
    series: np.ndarray

    def __float__(self) -> float:
        return self.value


class UnionDomain:
    """Disjoint union of star-shaped domains; integrals add over the parts."""

    def __init__(self, parts: list):
        self.parts = list(parts)
        self.ndim = _star_of(self.parts[0]).ndim

    def contains(self, pts):
        out = _star_of(self.parts[0]).contains(pts)
        for p in self.parts[1:]:
            out = out | _star_of(p).contains(pts)
        return out


def _star_of(domain) -> StarShape:
    if isinstance(domain, Atlas):
        if domain.implicit is None:
            raise GeometryError("volume evaluation needs star-shaped implicit geometry")
        return domain.implicit
    if isinstance(domain, StarShape):
        return domain
    raise GeometryError(f"unsupported domain object {type(domain)!r}")


# ---------------------------------------------------------------------------
# ray casting
# ---------------------------------------------------------------------------

def _cast_interior(star: StarShape, x: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Exit chord t_b along each direction for x strictly inside."""
    roots = getattr(star, "quadratic_roots", None)
    if roots is not None:
        _, t_hi, _ = roots(x, V)
        return t_hi
    _, o_out, _ = _sphere_chords(star, x, V, _max_radius(star))
    i_in, i_out, i_real = _sphere_chords(star, x, V, _min_radius(star))
    lo = np.where(i_real & (i_out > 0), i_out, 0.0)
    return _bisect_excess(star, x, V, lo, o_out)


def _max_radius(star: StarShape) -> float:
    if not hasattr(star, "_rmax"):
        if star.ndim == 2:
            t = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
            u = np.stack([np.cos(t), np.sin(t)], axis=-1)
        else:
            rng = np.random.default_rng(3)
            u = rng.normal(size=(8192, 3))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = star.radial(u)
        star._rmax = float(np.max(r)) * (1 + 1e-9)
        star._rmin = float(np.min(r)) * (1 - 1e-9)
    return star._rmax


def _min_radius(star: StarShape) -> float:
    _max_radius(star)
    return star._rmin


def _sphere_chords(star: StarShape, x: np.ndarray, V: np.ndarray, r: float):
    """Chord roots against the sphere |y - c| = r (nan when missed)."""
    p = x - star.center
    b = V @ p
    disc = b * b - (p @ p - r * r)
    real = disc > 0
    sq = np.sqrt(np.where(real, disc, 0.0))
    return np.where(real, -b - sq, np.nan), np.where(real, -b + sq, np.nan), real


def _bisect_excess(star, x, V, lo, hi, iters=50):
    """Root of the radial excess on [lo, hi] with excess(lo)<=0<=excess(hi)
    or the reverse; sign at lo decides the orientation."""
    neg_lo = star.signed_radial_excess(x + lo[:, None] * V) <= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = star.signed_radial_excess(x + mid[:, None] * V) < 0
        take_lo = neg == neg_lo
        lo = np.where(take_lo, mid, lo)
        hi = np.where(take_lo, hi, mid)
    return 0.5 * (lo + hi)


def _cast_exterior(star: StarShape, x: np.ndarray, V: np.ndarray):
    """Entry/exit chords for x outside.

    The boundary is pinched between the spheres r_min and r_max, which
    brackets both crossings for directions that hit the inner sphere; the
    thin ambiguous rim (outer hit only) falls back to a ternary search.
    Quasiconvexity of the (convex) shipped families makes the inside set
    along each ray an interval.
    """
    f = getattr(star, "quadratic_cast", None)
    if f is not None:
        return f(x, V)
    rmax, rmin = _max_radius(star), _min_radius(star)
    o_in, o_out, o_real = _sphere_chords(star, x, V, rmax)
    i_in, i_out, i_real = _sphere_chords(star, x, V, rmin)
    sure = i_real & o_real & (i_in > 0)
    n = len(V)
    t_in = np.full(n, np.nan)
    t_out = np.full(n, np.nan)
    hit = np.zeros(n, dtype=bool)
    if np.any(sure):
        Vs = V[sure]
        lo = np.maximum(o_in[sure], 0.0)
        t_in[sure] = _bisect_excess(star, x, Vs, lo, i_in[sure])
        t_out[sure] = _bisect_excess(star, x, Vs, i_out[sure], o_out[sure])
        hit[sure] = True
    amb = o_real & ~sure & (o_out > 0)
    if np.any(amb):
        Va = V[amb]
        lo = np.maximum(o_in[amb], 0.0)
        hi = o_out[amb]
        for _ in range(52):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = star.signed_radial_excess(x + m1[:, None] * Va)
            f2 = star.signed_radial_excess(x + m2[:, None] * Va)
            sel = f1 < f2
            hi = np.where(sel, m2, hi)
            lo = np.where(sel, lo, m1)
        tmin = 0.5 * (lo + hi)
        sub_hit = star.signed_radial_excess(x + tmin[:, None] * Va) < 0
        if np.any(sub_hit):
            Vh = Va[sub_hit]
            lo0 = np.maximum(o_in[amb][sub_hit], 0.0)
            hi0 = o_out[amb][sub_hit]
            tm = tmin[sub_hit]
            ti = _bisect_excess(star, x, Vh, tm, lo0)
            to = _bisect_excess(star, x, Vh, tm, hi0)
            idx = np.flatnonzero(amb)[sub_hit]
            t_in[idx] = ti
            t_out[idx] = to
            hit[idx] = True
    return t_in, t_out, hit


# ---------------------------------------------------------------------------
# direction grids
# ---------------------------------------------------------------------------

def _composite_panels(lo: float, hi: float, specials, base: int, order: int,
                      bands=()):
    """Panel breakpoints on [lo, hi]: uniform base + dyadic grading toward
    each special point (s, min_width) + uniformly refined bands."""
    pts = set(np.linspace(lo, hi, base + 1))
    span = hi - lo
    for s, min_width in specials:
        w = span / 4.0
        while w > min_width:
            for p in (s - w, s + w):
                if lo < p < hi:
                    pts.add(p)
            w /= 2.0
        if lo < s < hi:
            pts.add(s)
    for (blo, bhi, n) in bands:
        blo, bhi = max(lo, blo), min(hi, bhi)
        if bhi > blo:
            pts.update(np.linspace(blo, bhi, n + 1))
    brk = np.array(sorted(pts))
    xg, wg = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (brk[1:] + brk[:-1])
    half = 0.5 * (brk[1:] - brk[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _rotation_to(axis: np.ndarray) -> np.ndarray:
    """Orthogonal matrix with third column = axis (3D)."""
    a = axis / np.linalg.norm(axis)
    if abs(a[2]) < 0.9999:
        b = np.cross([0.0, 0.0, 1.0], a)
    else:
        b = np.cross([0.0, 1.0, 0.0], a)
    b /= np.linalg.norm(b)
    c = np.cross(a, b)
    return np.stack([b, c, a], axis=1)


def _silhouette_band(star: StarShape, x: np.ndarray, R: np.ndarray,
                     cfg: QuadConfig) -> tuple[float, float]:
    """Bracket in the polar cosine of the exterior tangency ring (3D)."""
    phis = 2 * np.pi * np.arange(cfg.silhouette_phi) / cfg.silhouette_phi
    lo = np.full(len(phis), -1.0)   # hits (toward the body)
    hi = np.full(len(phis), 0.999)  # misses
    cp, sp = np.cos(phis), np.sin(phis)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        st = np.sqrt(np.maximum(1 - mid**2, 0.0))
        Vloc = np.stack([st * cp, st * sp, mid], axis=-1)
        _, _, hit = _cast_exterior(star, x, Vloc @ R.T)
        lo = np.where(hit, mid, lo)
        hi = np.where(hit, hi, mid)
    cts = 0.5 * (lo + hi)
    pad = 4.0 * float(np.max(hi - lo)) + 1e-6
    return float(np.min(cts) - pad), float(np.max(cts) + pad)


def direction_grid(star: StarShape, x: np.ndarray, axis: np.ndarray,
                   outside: bool, layer_scale: float, cfg: QuadConfig):
    """Graded direction nodes/weights on S^{n-1}, axis-aligned.

    Interior horizon layers are resolved down to the layer scale; exterior
    silhouette kinks (square-root type) get a fixed fine grading floor.
    """
    minw = max(layer_scale / 4.0, cfg.min_width_floor)
    minw_kink = max(3e-8, cfg.min_width_floor)
    if star.ndim == 2:
        # angle measured from axis; horizons near +-pi/2 (and the silhouette
        # for exterior points); integrand periodic on [0, 2pi)
        ang_axis = math.atan2(axis[1], axis[0])
        specials = [(np.pi / 2, minw), (3 * np.pi / 2, minw)]
        if outside:
            t = np.linspace(0, 2 * np.pi, 512, endpoint=False)
            Vs = np.stack([np.cos(ang_axis + t), np.sin(ang_axis + t)], axis=-1)
            _, _, hit = _cast_exterior(star, x, Vs)
            if np.any(hit) and not np.all(hit):
                # refine the two tangency angles by bisection on the hit test
                edges = []
                idx = np.nonzero(np.diff(hit.astype(int)) != 0)[0]
                for i in idx:
                    lo_a, hi_a = t[i], t[i + 1]
                    for _ in range(44):
                        mid = 0.5 * (lo_a + hi_a)
                        vm = np.array([[math.cos(ang_axis + mid),
                                        math.sin(ang_axis + mid)]])
                        _, _, hm = _cast_exterior(star, x, vm)
                        if bool(hm[0]) == bool(hit[i]):
                            lo_a = mid
                        else:
                            hi_a = mid
                    edges.append(0.5 * (lo_a + hi_a))
                specials = [(e, minw_kink) for e in edges]
        th, w = _composite_panels(0.0, 2 * np.pi, specials, cfg.base_panels * 2,
                                  cfg.panel_order)
        V = np.stack([np.cos(ang_axis + th), np.sin(ang_axis + th)], axis=-1)
        return V, w
    R = _rotation_to(axis)
    specials = [(0.0, minw)]
    bands = []
    if outside:
        blo, bhi = _silhouette_band(star, x, R, cfg)
        specials = [(blo, minw_kink), (bhi, minw_kink)]
        bands = [(blo, bhi, cfg.band_panels)]
    ct, wct = _composite_panels(-1.0, 1.0, specials, cfg.base_panels,
                                cfg.panel_order, bands)
    st = np.sqrt(np.maximum(1.0 - ct**2, 0.0))
    phi = 2 * np.pi * np.arange(cfg.n_phi) / cfg.n_phi
    wphi = 2 * np.pi / cfg.n_phi
    V = np.empty((len(ct), cfg.n_phi, 3))
    V[..., 0] = st[:, None] * np.cos(phi)[None, :]
    V[..., 1] = st[:, None] * np.sin(phi)[None, :]
    V[..., 2] = ct[:, None] * np.ones(cfg.n_phi)[None, :]
    W = (wct[:, None] * wphi) * np.ones(cfg.n_phi)[None, :]
    return (V.reshape(-1, 3) @ R.T), W.ravel()


# ---------------------------------------------------------------------------
# the pv evaluator
# ---------------------------------------------------------------------------

def _require_cz(kernel: HomogeneousKernel) -> None:
    if kernel.homogeneity != -kernel.dimension:
        raise KernelError(
            f"kernel {kernel.name} has homogeneity {kernel.homogeneity}, "
            f"need -{kernel.dimension} for a pv volume integral")
    if kernel.mean_zero_residual() > 1e-8:
        raise KernelError(
            f"kernel {kernel.name} is not mean-zero on the sphere "
            f"(residual {kernel.mean_zero_residual():.2e}); pv limit may not exist")


def _geometry_for_point(domain, x: np.ndarray, foot_hint=None):
    """(star, axis, dist, outside) for the evaluation point."""
    star = _star_of(domain)
    if foot_hint is not None:
        axis, dist = np.asarray(foot_hint[0], float), float(foot_hint[1])
    elif isinstance(domain, Atlas):
        foot = nearest_boundary_point(domain, x)
        dist = foot.dist
        axis = x - foot.point
    else:
        exc = float(star.signed_radial_excess(x[None, :])[0])
        dist = abs(exc)
        axis = x - star.center
    nrm = np.linalg.norm(axis)
    if nrm < 1e-13:
        axis = np.zeros(star.ndim)
        axis[-1] = 1.0
    else:
        axis = axis / nrm
    outside = not bool(star.contains(x[None, :])[0])
    return star, axis, dist, outside


def _chord_logs(star, x, V, outside):
    if outside:
        t_in, t_out, hit = _cast_exterior(star, x, V)
        return t_in, t_out, hit
    t_b = _cast_interior(star, x, V)
    return np.zeros_like(t_b), t_b, np.ones(len(t_b), dtype=bool)


def _richardson(eps: np.ndarray, series: np.ndarray, order: int):
    table = [series.astype(float)]
    for j in range(1, min(order, len(series) - 1) + 1):
        prev = table[-1]
        table.append(prev[1:] + (prev[1:] - prev[:-1]) / (2.0**j - 1.0))
    value = float(table[-1][-1])
    err = abs(table[-1][-1] - table[-2][-1]) if len(table) > 1 else 0.0
    return value, float(err)


def t_volume_pv(kernel: HomogeneousKernel, domain, x,
                schedule: PvSchedule | None = None,
                quad: QuadConfig | None = None, foot_hint=None) -> PvResult:
    """pv integral of K(x-y) over the domain, with the eps-shell schedule.

    Returns the Richardson-extrapolated limit of the shell integrals
    together with the raw series; raises ConvergenceError when the series
    does not settle.
    """
    _require_cz(kernel)
    if isinstance(domain, UnionDomain):
        schedule = schedule or PvSchedule()
        if schedule.eps0 is None:
            dists = []
            for p in domain.parts:
                _, _, d, _ = _geometry_for_point(p, np.asarray(x, float))
                dists.append(d)
            schedule = PvSchedule(eps0=0.1 * min(dists), count=schedule.count,
                                  ratio=schedule.ratio,
                                  extrapolation_order=schedule.extrapolation_order)
        parts = [t_volume_pv(kernel, p, x, schedule, quad) for p in domain.parts]
        val = sum(p.value for p in parts)
        return PvResult(value=val, err_est=sum(p.err_est for p in parts),
                        eps=parts[0].eps, series=sum(p.series for p in parts))
    x = np.asarray(x, float)
    if kernel.dimension != (domain.ndim if hasattr(domain, "ndim") else len(x)):
        raise KernelError("kernel dimension does not match domain dimension")
    schedule = schedule or PvSchedule()
    quad = quad or QuadConfig()
    star, axis, dist, outside = _geometry_for_point(domain, x, foot_hint)
    scale = _max_radius(star)
    if dist < 1e-11 * scale:
        raise GeometryError(
            "point is on the boundary; use the boundary-operator route")
    eps = schedule.radii(dist if schedule.eps0 is None else 1.0)
    layer = min(max(dist, float(np.min(eps))) / (2.0 * scale), 0.25)
    key = (id(star), x.tobytes(), outside, round(math.log(max(layer, 1e-300)), 3),
           quad.base_panels, quad.panel_order, quad.n_phi, quad.band_panels)
    cached = _CHORD_CACHE.get(key)
    if cached is None:
        V, W = direction_grid(star, x, axis, outside, layer, quad)
        t_in, t_out, hit = _chord_logs(star, x, V, outside)
        _CHORD_CACHE[key] = (V, W, t_in, t_out, hit)
        while len(_CHORD_CACHE) > 8:
            _CHORD_CACHE.pop(next(iter(_CHORD_CACHE)))
    else:
        V, W, t_in, t_out, hit = cached
    om = np.asarray(kernel.angular_part(-V), float)
    omW = om * W
    series = np.empty(len(eps))
    absint = 0.0
    for k, e in enumerate(eps):
        lo = np.maximum(t_in, e)
        with np.errstate(invalid="ignore", divide="ignore"):
            L = np.log(t_out / lo)
        L = np.where(hit & (t_out > lo), L, 0.0)
        series[k] = float(np.sum(omW * L))
        absint = max(absint, float(np.sum(np.abs(omW * L))))
    # differences below the roundoff floor of the absolute integrand do not
    # count as movement when judging convergence of the shell series
    floor = 1e-11 * absint + 1e-15
    diffs = np.abs(np.diff(series))
    moving = diffs > floor
    if np.count_nonzero(moving) >= 3:
        tail = diffs[moving]
        if tail[-1] > 1.2 * tail[0] and tail[-1] > 4 * floor:
            raise ConvergenceError(
                "pv series not convergent: shell differences are growing",
                series=(eps.copy(), series.copy()))
    value, err = _richardson(eps, series, schedule.extrapolation_order)
    return PvResult(value=value, err_est=max(err, 1e-16 * absint),
                    eps=eps, series=series)


_CHORD_CACHE: dict = {}


def t_volume_pv_value(kernel, domain, x, **kw) -> float:
    return t_volume_pv(kernel, domain, x, **kw).value


# ---------------------------------------------------------------------------
# FFT multiplier oracle
# ---------------------------------------------------------------------------

@dataclass
class GridOracleConfig:
    box_side: float
    resolution: int = 96          # per axis (128 is the 2D default; see build)
    smoothing_cells: float = 0.0  # Gaussian mollification width, in cells
    subcell: int = 1              # >1: antialias boundary cells with subcell^n samples
    center: tuple = ()
    image_shells: int = 6         # monopole far-field correction of periodic images


class GridOracle:
    """Periodic-grid values of T(1_D) with multiplier c_m P(xi)/|xi|^m.

    The FFT computes the periodic operator; ``sample`` subtracts the
    monopole far field of the periodic images, |D| sum_k K(x - c - L k), to
    recover the free-space value (symmetric cubic truncation cancels the
    conditionally convergent tail to higher order).
    """

    def __init__(self, values: np.ndarray, origin: np.ndarray, spacing: float,
                 meta: dict | None = None, kernel: HomogeneousKernel | None = None):
        self.values = values
        self.origin = np.asarray(origin, float)
        self.spacing = float(spacing)
        self.meta = meta or {}
        self.kernel = kernel

    def grid_index(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, float))
        idx = np.rint((p - self.origin) / self.spacing).astype(int)
        return idx

    def _image_shifts(self) -> np.ndarray | None:
        shells = int(self.meta.get("image_shells", 0))
        if shells <= 0 or self.kernel is None:
            return None
        n = self.values.ndim
        L = float(self.meta["box_side"])
        rng = range(-shells, shells + 1)
        shifts = np.stack(np.meshgrid(*([list(rng)] * n), indexing="ij"),
                          axis=-1).reshape(-1, n).astype(float)
        return shifts[np.any(shifts != 0, axis=1)] * L

    def image_correction(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, float))
        shifts = self._image_shifts()
        if shifts is None:
            return np.zeros(len(p))
        vol = float(self.meta["volume"])
        centroid = np.asarray(self.meta["centroid"], float)
        rel = p[:, None, :] - centroid[None, None, :] - shifts[None, :, :]
        return vol * np.sum(self.kernel(rel.reshape(-1, p.shape[1]))
                            .reshape(len(p), -1), axis=1)

    def sample(self, pts) -> np.ndarray:
        """Nearest-node free-space values (meaningful only away from the
        boundary, where the field varies on the grid scale)."""
        idx = self.grid_index(pts)
        shape = self.values.shape
        for d in range(len(shape)):
            if np.any(idx[:, d] < 0) or np.any(idx[:, d] >= shape[d]):
                raise GeometryError("sample point outside the oracle grid")
        raw = self.values[tuple(idx.T)]
        return raw - self.image_correction(self.grid_points(idx))

    def grid_points(self, idx) -> np.ndarray:
        return self.origin + np.asarray(idx, float) * self.spacing

    def dump(self, path_base: str) -> tuple[str, str]:
        bin_path = path_base + ".bin"
        hdr_path = path_base + ".json"
        self.values.astype("<f8").tofile(bin_path)
        with open(hdr_path, "w") as f:
            json.dump({"dims": list(self.values.shape),
                       "spacing": self.spacing,
                       "origin": self.origin.tolist(),
                       "dtype": "<f8", **self.meta}, f, indent=1)
        return bin_path, hdr_path

    @classmethod
    def load(cls, path_base: str) -> "GridOracle":
        from .kernels import resolve_kernel
        with open(path_base + ".json") as f:
            hdr = json.load(f)
        vals = np.fromfile(path_base + ".bin", dtype="<f8").reshape(hdr["dims"])
        try:
            kern = resolve_kernel(hdr.get("kernel", ""))
        except KernelError:
            kern = None
        return cls(vals, np.array(hdr["origin"]), hdr["spacing"], meta=hdr,
                   kernel=kern)


def _rasterize(domain, cfg: GridOracleConfig, n: int):
    res = cfg.resolution
    h = cfg.box_side / res
    center = np.asarray(cfg.center if cfg.center else np.zeros(n), float)
    origin = center - cfg.box_side / 2.0 + h / 2.0
    ax = [origin[d] + h * np.arange(res) for d in range(n)]
    mesh = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, n)
    ind = domain.contains(pts).astype(float).reshape((res,) * n)
    if cfg.subcell > 1:
        # refine cells whose neighborhood is mixed
        mixed = np.zeros_like(ind, dtype=bool)
        for d in range(n):
            mixed |= np.roll(ind, 1, axis=d) != ind
            mixed |= np.roll(ind, -1, axis=d) != ind
        cells = np.argwhere(mixed)
        if len(cells):
            s = cfg.subcell
            offs1 = (np.arange(s) + 0.5) / s - 0.5
            off = np.stack(np.meshgrid(*([offs1] * n), indexing="ij"),
                           axis=-1).reshape(-1, n) * h
            centers = origin + cells * h
            sub = centers[:, None, :] + off[None, :, :]
            frac = domain.contains(sub.reshape(-1, n)).reshape(len(cells), -1)
            ind[tuple(cells.T)] = frac.mean(axis=1)
    return ind, origin, h


def cz_multiplier_constant(m: int, n: int) -> complex:
    """alpha -> 0 limit of the homogeneous-kernel multiplier (pv convention)."""
    if m < 1:
        raise KernelError("pv multiplier needs numerator degree >= 1")
    return (1j**m) * math.pi ** (n / 2.0) * math.gamma(m / 2.0) / math.gamma((m + n) / 2.0)


def t_fourier_oracle(kernel: HomogeneousKernel, domain,
                     cfg: GridOracleConfig) -> GridOracle:
    """Spectral evaluation of T(1_D) on a periodic grid.

    Accurate only at points whose distance to the boundary exceeds a few
    grid cells; the boundary layer carries the Gibbs/rasterization error.
    """
    _require_cz(kernel)
    if not kernel.numerator.is_harmonic():
        raise KernelError("grid oracle needs a harmonic numerator")
    n = kernel.dimension
    shape = _star_of(domain) if isinstance(domain, (Atlas, StarShape)) else domain
    if not hasattr(shape, "contains"):
        raise GeometryError("grid oracle needs a domain with a contains() test")
    # containment check: domain must fit in the central half of the box
    if isinstance(domain, (Atlas, StarShape)):
        s = _star_of(domain)
        extent = _max_radius(s) + float(np.max(np.abs(
            s.center - np.asarray(cfg.center if cfg.center else np.zeros(n)))))
        if extent > cfg.box_side / 4.0 * (1.0 + 1e-6):
            raise GeometryError(
                f"domain extent {extent:.3g} exceeds the central half of the "
                f"box (need box_side >= {4 * extent:.3g})")
    ind, origin, h = _rasterize(shape, cfg, n)
    m = kernel.degree
    c = cz_multiplier_constant(m, n)
    freqs = [np.fft.fftfreq(cfg.resolution, d=h) for _ in range(n - 1)]
    freqs.append(np.fft.rfftfreq(cfg.resolution, d=h))
    grids = np.meshgrid(*freqs, indexing="ij")
    xi = np.stack(grids, axis=-1)
    xin = np.linalg.norm(xi, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sym = c * kernel.numerator(xi) / xin**m
    sym[xin == 0] = 0.0
    if cfg.smoothing_cells > 0:
        sym = sym * np.exp(-0.5 * (2 * np.pi * cfg.smoothing_cells * h * xin) ** 2)
    vals = np.fft.irfftn(np.fft.rfftn(ind) * sym, s=(cfg.resolution,) * n)
    vol = float(ind.sum()) * h**n
    cells = np.argwhere(ind > 0)
    wts = ind[tuple(cells.T)]
    centroid = ((origin + cells * h) * wts[:, None]).sum(axis=0) / wts.sum()
    return GridOracle(vals, origin, h, kernel=kernel,
                      meta={"kernel": kernel.name, "resolution": cfg.resolution,
                            "box_side": cfg.box_side,
                            "smoothing_cells": cfg.smoothing_cells,
                            "subcell": cfg.subcell,
                            "image_shells": cfg.image_shells,
                            "volume": vol, "centroid": centroid.tolist()})
