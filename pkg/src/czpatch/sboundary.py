"""Boundary operator S(f)(x) = pv int k(x-y) f(y) dS and the volume
reduction T(1_D) = sum_j S_{A_j}(N_j) via the divergence antiderivative.

Surface quadrature uses per-chart tensor Gauss-Legendre panels on the
atlas' exact integration tiles, with quadtree refinement wherever the
panel size exceeds a fixed fraction of its distance to the evaluation
point.  Principal values exclude quadrature nodes inside the metric ball
|x - y| < eps; panels straddling an exclusion radius are subdivided so the
staircase error stays far below the shell contributions, and the eps
series is extrapolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Atlas, GeometryError, normal_unchecked
from .kernels import HomogeneousKernel, KernelError, divergence_antiderivative
from .normalcoords import nearest_boundary_point
from .svolume import ConvergenceError, _richardson


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

class BoundaryDensity:
    """Bounded density on the boundary, evaluated at quadrature nodes.

    The pullback g(gamma) = f(Z(gamma)) |N(gamma)| is what the quadrature
    actually sums; ``eval`` receives points, (inward, unnormalized) normals
    and chart parameters so densities built from any of them are cheap.
    """

    def __init__(self, fn: Callable, name: str = "density"):
        self._fn = fn
        self.name = name

    def eval(self, points, normals, chart_idx, alphas) -> np.ndarray:
        return np.asarray(self._fn(points, normals, chart_idx, alphas), float)

    @classmethod
    def constant(cls, c: float) -> "BoundaryDensity":
        return cls(lambda p, n, ci, al: np.full(len(p), float(c)), name=f"const({c})")

    @classmethod
    def from_point_function(cls, fn: Callable, name: str = "f(point)") -> "BoundaryDensity":
        return cls(lambda p, n, ci, al: fn(p), name=name)

    @classmethod
    def normal_component(cls, j: int, normalized: bool = True) -> "BoundaryDensity":
        """Component N_j/|N| (normalized) or N_j of the inward normal."""

        def fn(p, n, ci, al):
            if normalized:
                return n[:, j] / np.linalg.norm(n, axis=1)
            return n[:, j]

        return cls(fn, name=f"N_{j + 1}" + ("/|N|" if normalized else ""))


# ---------------------------------------------------------------------------
# adaptive panel quadrature
# ---------------------------------------------------------------------------

@dataclass
class SurfaceQuadConfig:
    base_panels: int = 8        # panels per tile axis before refinement
    panel_order: int = 4        # tensor Gauss-Legendre order per panel
    theta_refine: float = 0.35  # split while image size > theta * distance
    size_floor_frac: float = 0.04   # panel floor relative to max(eps, dist floor)
    min_rel_size: float = 1e-9  # hard floor relative to tile size
    max_nodes: int = 1_500_000


def _chart_lip_bound(chart) -> float:
    if not hasattr(chart, "_lip_bound"):
        grids = [np.linspace(chart.lo[j], chart.hi[j], 9) for j in range(chart.pdim)]
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, chart.pdim)
        d = chart.dZ(mesh)
        chart._lip_bound = 1.2 * float(np.max(np.linalg.norm(d, axis=1)))
    return chart._lip_bound


def _refine_panels(chart, x: np.ndarray | None, cfg: SurfaceQuadConfig,
                   dist_floor: float):
    """Quadtree panels on the chart's integration tile, graded toward x."""
    p = chart.pdim
    lo, hi = chart.tile_lo, chart.tile_hi
    nb = cfg.base_panels
    axes = [lo[j] + (hi[j] - lo[j]) * (np.arange(nb) + 0.5) / nb for j in range(p)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p)
    halves = np.tile((hi - lo) / (2 * nb), (len(centers), 1))
    if x is None:
        return centers, halves
    lipb = _chart_lip_bound(chart)
    done_c: list[np.ndarray] = []
    done_h: list[np.ndarray] = []
    tile_scale = float(np.max(hi - lo))
    z = chart.Z(centers)
    for _ in range(64):
        if len(centers) == 0:
            break
        size = 2.0 * np.max(halves, axis=1) * lipb  # image-size upper bound
        dist = np.linalg.norm(z - x, axis=1) - 0.75 * size
        target = cfg.theta_refine * np.maximum(dist, cfg.size_floor_frac * dist_floor
                                               / cfg.theta_refine)
        need = size > np.maximum(target, cfg.min_rel_size * tile_scale * lipb)
        done_c.append(centers[~need])
        done_h.append(halves[~need])
        if not np.any(need):
            break
        c, h = centers[need], halves[need]
        h2 = h / 2.0
        if p == 2:
            offs = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], float)
            centers = (c[:, None, :] + offs[None, :, :] * h2[:, None, :]).reshape(-1, 2)
            halves = np.repeat(h2, 4, axis=0)
        else:
            offs = np.array([[-1], [1]], float)
            centers = (c[:, None, :] + offs[None, :, :] * h2[:, None, :]).reshape(-1, 1)
            halves = np.repeat(h2, 2, axis=0)
        z = chart.Z(centers)
    else:
        done_c.append(centers)
        done_h.append(halves)
    return np.concatenate(done_c), np.concatenate(done_h)


def _gl_cache(order: int):
    xg, wg = np.polynomial.legendre.leggauss(order)
    return xg, wg


def _panel_nodes(centers, halves, order: int, pdim: int):
    xg, wg = _gl_cache(order)
    if pdim == 2:
        ox, oy = np.meshgrid(xg, xg, indexing="ij")
        offs = np.stack([ox.ravel(), oy.ravel()], axis=-1)       # (o^2, 2)
        wts = np.outer(wg, wg).ravel()
    else:
        offs = xg[:, None]
        wts = wg
    nodes = centers[:, None, :] + offs[None, :, :] * halves[:, None, :]
    area = np.prod(halves, axis=1)
    weights = area[:, None] * wts[None, :]
    return nodes.reshape(-1, pdim), weights.reshape(-1)


@dataclass
class SurfaceNodes:
    points: np.ndarray
    weights: np.ndarray        # parameter measure (GL weight * panel area)
    normals: np.ndarray        # inward N = d1Z ^ d2Z at the nodes
    chart_idx: np.ndarray
    alphas: np.ndarray
    dists: np.ndarray          # |x - y| (0 when no evaluation point given)


def surface_nodes(atlas: Atlas, x=None, cfg: SurfaceQuadConfig | None = None,
                  dist_floor: float = 0.0,
                  split_radii=()) -> SurfaceNodes:
    """Quadrature nodes over the whole boundary, graded toward x.

    ``split_radii``: exclusion radii; panels whose distance range straddles
    one are subdivided once more so node rejection resolves the edge.
    """
    cfg = cfg or SurfaceQuadConfig()
    pts, wts, nrms, cidx, als = [], [], [], [], []
    x = None if x is None else np.asarray(x, float)
    for ci, ch in enumerate(atlas.charts):
        centers, halves = _refine_panels(ch, x, cfg, dist_floor)
        if x is not None and len(split_radii):
            z = ch.Z(centers)
            lipb = _chart_lip_bound(ch)
            rad = np.linalg.norm(z - x, axis=1)
            size = 2.0 * np.max(halves, axis=1) * lipb
            strad = np.zeros(len(centers), dtype=bool)
            for eps in split_radii:
                strad |= (rad - size > -eps) & (rad - size < eps) & (rad + size > eps)
            for _ in range(2):  # two extra dyadic levels across the edge
                if not np.any(strad):
                    break
                c, h = centers[strad], halves[strad]
                keep_c, keep_h = centers[~strad], halves[~strad]
                h2 = h / 2.0
                if ch.pdim == 2:
                    offs = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], float)
                    newc = (c[:, None, :] + offs[None, :, :] * h2[:, None, :]).reshape(-1, 2)
                    newh = np.repeat(h2, 4, axis=0)
                else:
                    offs = np.array([[-1], [1]], float)
                    newc = (c[:, None, :] + offs[None, :, :] * h2[:, None, :]).reshape(-1, 1)
                    newh = np.repeat(h2, 2, axis=0)
                centers = np.concatenate([keep_c, newc])
                halves = np.concatenate([keep_h, newh])
                z = ch.Z(centers)
                rad = np.linalg.norm(z - x, axis=1)
                size = 2.0 * np.max(halves, axis=1) * lipb
                strad = np.zeros(len(centers), dtype=bool)
                for eps in split_radii:
                    strad |= (rad - size > -eps) & (rad - size < eps) & (rad + size > eps)
        nodes, w = _panel_nodes(centers, halves, cfg.panel_order, ch.pdim)
        if len(nodes) > cfg.max_nodes:
            raise GeometryError("surface quadrature exceeded the node budget")
        y = ch.Z(nodes)
        nn = normal_unchecked(ch, nodes)
        pts.append(y)
        wts.append(w)
        nrms.append(nn)
        cidx.append(np.full(len(nodes), ci))
        als.append(nodes if ch.pdim == 2 else nodes.reshape(-1, 1))
    points = np.concatenate(pts)
    out = SurfaceNodes(points=points, weights=np.concatenate(wts),
                       normals=np.concatenate(nrms),
                       chart_idx=np.concatenate(cidx),
                       alphas=np.concatenate(als),
                       dists=(np.zeros(len(points)) if x is None
                              else np.linalg.norm(points - x, axis=1)))
    return out


# ---------------------------------------------------------------------------
# S evaluation
# ---------------------------------------------------------------------------

@dataclass
class PvBoundaryResult:
    value: float
    err_est: float
    eps: np.ndarray
    series: np.ndarray
    smooth_part: float  # contribution from |x-y| >= eta (computed once)


def _require_odd(kernel: HomogeneousKernel) -> None:
    if kernel.parity != "odd":
        raise KernelError(
            f"boundary operator needs an odd kernel, got {kernel.name} (even)")
    if kernel.homogeneity != -(kernel.dimension - 1):
        raise KernelError(
            f"boundary kernel must be homogeneous of degree -(n-1), "
            f"got {kernel.homogeneity}")


def _integrand(kernel, f: BoundaryDensity, x, nodes: SurfaceNodes) -> np.ndarray:
    rel = x[None, :] - nodes.points
    kv = kernel(rel)
    fv = f.eval(nodes.points, nodes.normals, nodes.chart_idx, nodes.alphas)
    return kv * fv * np.linalg.norm(nodes.normals, axis=1) * nodes.weights


def pv_on_boundary(kernel: HomogeneousKernel, atlas: Atlas, f: BoundaryDensity,
                   chart: int, alpha, eta: float, eps_seq=None,
                   cfg: SurfaceQuadConfig | None = None) -> PvBoundaryResult:
    """Principal value at a boundary point by symmetric metric exclusion.

    The smooth region |x-y| >= eta contributes once; the singular cap is
    summed for each exclusion radius and the series extrapolated.
    """
    _require_odd(kernel)
    ch = atlas.charts[chart]
    alpha = np.asarray(alpha, float)
    x = ch.Z(alpha[None, :])[0]
    if eps_seq is None:
        eps_seq = eta * 0.25 * 0.5 ** np.arange(6)
    eps_seq = np.asarray(sorted(eps_seq, reverse=True), float)
    cfg = cfg or SurfaceQuadConfig()
    nodes = surface_nodes(atlas, x, cfg, dist_floor=float(np.min(eps_seq)),
                          split_radii=tuple(eps_seq))
    contrib = _integrand(kernel, f, x, nodes)
    far = nodes.dists >= eta
    smooth = float(np.sum(contrib[far]))
    series = np.array([smooth + float(np.sum(contrib[(~far) & (nodes.dists > e)]))
                       for e in eps_seq])
    diffs = np.abs(np.diff(series))
    scale = max(float(np.sum(np.abs(contrib[far]))), 1e-30)
    moving = diffs > 1e-10 * scale
    if np.count_nonzero(moving) >= 3:
        tail = diffs[moving]
        if tail[-1] > 1.5 * tail[0]:
            raise ConvergenceError("boundary pv series not convergent",
                                   series=(eps_seq, series))
    value, err = _richardson(eps_seq, series, 2)
    return PvBoundaryResult(value=value, err_est=max(err, 1e-14 * scale),
                            eps=eps_seq, series=series, smooth_part=smooth)


def s_eval(kernel: HomogeneousKernel, atlas: Atlas, f: BoundaryDensity, x,
           cfg: SurfaceQuadConfig | None = None, nm=None,
           boundary_tol: float = 1e-11) -> float:
    """Regime-dispatched boundary-operator value at x.

    On the boundary: pv with metric exclusion; off the boundary: plain
    quadrature graded toward the foot point (the integrand is bounded by
    dist^{-(n-1)} there, which the distance-proportional panels resolve).
    """
    _require_odd(kernel)
    x = np.asarray(x, float)
    cfg = cfg or SurfaceQuadConfig()
    foot = nearest_boundary_point(atlas, x)
    scale = max(np.linalg.norm(x), 1.0)
    if foot.dist <= boundary_tol * scale:
        eta = nm.eta if nm is not None else 0.2 * atlas.diam()
        return pv_on_boundary(kernel, atlas, f, foot.chart, foot.alpha,
                              eta, cfg=cfg).value
    nodes = surface_nodes(atlas, x, cfg, dist_floor=foot.dist)
    return float(np.sum(_integrand(kernel, f, x, nodes)))


# ---------------------------------------------------------------------------
# volume operator via the boundary reduction
# ---------------------------------------------------------------------------

_ANTIDERIVATIVE_CACHE: dict[str, list[HomogeneousKernel]] = {}


def antiderivative_components(kernel: HomogeneousKernel) -> list[HomogeneousKernel]:
    comps = _ANTIDERIVATIVE_CACHE.get(kernel.name)
    if comps is None:
        comps = divergence_antiderivative(kernel)
        _ANTIDERIVATIVE_CACHE[kernel.name] = comps
    return comps


def t_from_boundary(kernel: HomogeneousKernel, atlas: Atlas, x,
                    cfg: SurfaceQuadConfig | None = None,
                    pv_eta: float | None = None,
                    eps_seq=None) -> float:
    """T(1_D)(x) assembled as sum_j S_{A_j}(N_j) with inward normals.

    With the inward orientation the outward flux element is -N dalpha, and
    div_y A(x-y) = -K(x-y), so the divergence theorem gives
    T(1_D)(x) = sum_j int A_j(x - Z(gamma)) N_j(gamma) dgamma.
    For x on the boundary the same sum is taken in the pv sense.
    """
    comps = antiderivative_components(kernel)
    x = np.asarray(x, float)
    cfg = cfg or SurfaceQuadConfig()
    foot = nearest_boundary_point(atlas, x)
    scale = max(np.linalg.norm(x), 1.0)
    on_boundary = foot.dist <= 1e-11 * scale

    if not on_boundary:
        nodes = surface_nodes(atlas, x, cfg, dist_floor=foot.dist)
        rel = x[None, :] - nodes.points
        total = np.zeros(len(nodes.points))
        for j, aj in enumerate(comps):
            total += np.asarray(aj(rel), float) * nodes.normals[:, j]
        return float(np.sum(total * nodes.weights))

    eta = pv_eta if pv_eta is not None else 0.1 * atlas.diam()
    if eps_seq is None:
        eps_seq = eta * 0.25 * 0.5 ** np.arange(6)
    eps_seq = np.asarray(sorted(eps_seq, reverse=True), float)
    nodes = surface_nodes(atlas, x, cfg, dist_floor=float(np.min(eps_seq)),
                          split_radii=tuple(eps_seq))
    rel = x[None, :] - nodes.points
    total = np.zeros(len(nodes.points))
    for j, aj in enumerate(comps):
        total += np.asarray(aj(rel), float) * nodes.normals[:, j]
    contrib = total * nodes.weights
    series = np.array([float(np.sum(contrib[nodes.dists > e])) for e in eps_seq])
    value, _ = _richardson(eps_seq, series, 2)
    return value


def one_sided_limits(kernel: HomogeneousKernel, atlas: Atlas, chart: int,
                     alpha, deltas, cfg: SurfaceQuadConfig | None = None):
    """T(1_D) along the inward/outward unit normal ray at a boundary point."""
    ch = atlas.charts[chart]
    alpha = np.asarray(alpha, float)
    z = ch.Z(alpha[None, :])[0]
    n = normal_unchecked(ch, alpha[None, :])[0]
    nu = n / np.linalg.norm(n)
    inner = [t_from_boundary(kernel, atlas, z + d * nu, cfg) for d in deltas]
    outer = [t_from_boundary(kernel, atlas, z - d * nu, cfg) for d in deltas]
    return np.array(inner), np.array(outer)
