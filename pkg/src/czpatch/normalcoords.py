"""Near-boundary point decomposition and the normal-coordinate solver.

Near-boundary points are written x = Z(alpha) + delta Ntilde(alpha) in the
chart frame (t1, t2, Ntilde) = (d1Z, d2Z, N/sqrt|N|); offsets h decompose
as h = h_n Ntilde + h_tau . dZ.  All of delta, h_n, h_tau, lambda, mu are
frame *coefficients* (Ntilde is not unit length); metric distances are
reported separately where regimes are classified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (Atlas, Chart, DomainNorms, GeometryError,
                       normal_unchecked)


class SolverError(RuntimeError):
    """Fixed-point iteration failed to contract."""


class ChartTransitionError(RuntimeError):
    """Iterate left the chart's parameter domain."""


class ClassificationError(ValueError):
    """Point pair not classifiable (e.g. straddles the boundary)."""


# ---------------------------------------------------------------------------
# frames and foot points
# ---------------------------------------------------------------------------

def _ntilde_at(chart: Chart, alpha: np.ndarray) -> np.ndarray:
    n = normal_unchecked(chart, alpha[None, :])[0]
    mag = np.linalg.norm(n)
    if mag < 1e-14:
        raise GeometryError("degenerate chart frame: N = 0")
    return n / math.sqrt(mag)


def frame(chart: Chart, alpha) -> np.ndarray:
    """Columns (d1Z, d2Z, Ntilde) at alpha (2D: (dZ, Ntilde))."""
    alpha = np.asarray(alpha, float)
    d = chart.dZ(alpha[None, :])[0]  # (n, pdim)
    nt = _ntilde_at(chart, alpha)
    return np.column_stack([d, nt])


@dataclass
class FootPoint:
    chart: int
    alpha: np.ndarray
    point: np.ndarray
    dist: float
    side: int  # +1 interior, -1 exterior, 0 on boundary

    @property
    def delta_coeff(self) -> float:
        """Distance expressed as the Ntilde-frame coefficient."""
        return self.dist / self.ntilde_mag

    ntilde_mag: float = 1.0


def nearest_boundary_point(atlas: Atlas, x, newton_steps: int = 60,
                           tol: float = 1e-13) -> FootPoint:
    """Foot point by damped Gauss-Newton on |Z(alpha) - x|^2.

    Seeded by radial chart inversion for star-shaped families, falling back
    to a coarse per-chart grid search.
    """
    x = np.asarray(x, float)
    seeds: list[tuple[int, np.ndarray]] = []
    if atlas._invert is not None and atlas.implicit is not None:
        p = x - atlas.implicit.center
        if np.linalg.norm(p) < 1e-12:
            p = np.zeros(atlas.ndim)
            p[-1] = 1.0
        ci, al = atlas.invert((atlas.implicit.center + p)[None, :])
        seeds.append((int(ci[0]), al[0]))
    # coarse grid seeds (the radial seed alone misses non-radial feet, e.g.
    # near the center of an elongated ellipsoid)
    cache = getattr(atlas, "_seed_grids", None)
    if cache is None:
        cache = []
        for ch in atlas.charts:
            grids = [np.linspace(ch.tile_lo[j], ch.tile_hi[j], 7) for j in range(ch.pdim)]
            mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, ch.pdim)
            cache.append((mesh, ch.Z(mesh)))
        atlas._seed_grids = cache
    cands = []
    for ci, (mesh, zs) in enumerate(cache):
        d2 = np.sum((zs - x) ** 2, axis=1)
        k = int(np.argmin(d2))
        cands.append((float(d2[k]), ci, mesh[k]))
    cands.sort(key=lambda c: c[0])
    seeds.extend((ci, a) for _, ci, a in cands[:2])
    best = None
    for ci, a0 in seeds:
        ch = atlas.charts[ci]
        a = np.clip(a0, ch.lo, ch.hi)
        f_prev = float(np.sum((ch.Z(a[None, :])[0] - x) ** 2))
        for _ in range(newton_steps):
            z = ch.Z(a[None, :])[0]
            J = ch.dZ(a[None, :])[0]
            r = z - x
            g = J.T @ r
            H = J.T @ J
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            improved = False
            for _ in range(30):
                a_new = np.clip(a + t * step, ch.lo, ch.hi)
                f_new = float(np.sum((ch.Z(a_new[None, :])[0] - x) ** 2))
                if f_new < f_prev:
                    a, f_prev, improved = a_new, f_new, True
                    break
                t *= 0.5
            if not improved or np.linalg.norm(t * step) < tol * ch.param_scale():
                break
        if best is None or f_prev < best[0]:
            best = (f_prev, ci, a.copy())
    f_best, ci, a = best
    ch = atlas.charts[ci]
    z = ch.Z(a[None, :])[0]
    dist = math.sqrt(f_best)
    side = 0
    if atlas.implicit is not None and dist > 1e-12 * max(1.0, np.linalg.norm(x)):
        side = 1 if bool(atlas.contains(x[None, :])[0]) else -1
    nt = _ntilde_at(ch, a)
    return FootPoint(chart=ci, alpha=a, point=z, dist=dist, side=side,
                     ntilde_mag=float(np.linalg.norm(nt)))


# ---------------------------------------------------------------------------
# offset decomposition
# ---------------------------------------------------------------------------

def decompose_offset(atlas: Atlas, chart: int, alpha, h) -> tuple[float, np.ndarray]:
    """Unique (h_n, h_tau) with h = h_n Ntilde + sum h_tau_j d_j Z at alpha."""
    ch = atlas.charts[chart]
    F = frame(ch, alpha)
    cond = np.linalg.cond(F)
    if not np.isfinite(cond) or cond > 1e12:
        raise GeometryError("degenerate frame at alpha")
    coeff = np.linalg.solve(F, np.asarray(h, float))
    h_tau = coeff[:-1]
    h_n = float(coeff[-1])
    return h_n, h_tau


# ---------------------------------------------------------------------------
# fixed-point solver for x + h = Z(alpha+lambda) + mu Ntilde(alpha+lambda)
# ---------------------------------------------------------------------------

@dataclass
class NormalCoords:
    lmbda: np.ndarray      # parameter shift (pdim,)
    mu: float              # Ntilde coefficient at alpha + lambda
    residual: float
    iterations: int
    bold_lambda_norm: float   # |(lambda, mu)|
    bold_h_norm: float        # |(h_tau, h_n + delta)|
    within_paper_cutoffs: bool


def _divided_diff(ch: Chart, a: np.ndarray, b: np.ndarray, lam: float,
                  axis: int) -> np.ndarray:
    """(Z(b) - Z(a)) / lam, with the analytic derivative limit at lam = 0."""
    if abs(lam) < 1e-14 * ch.param_scale():
        return ch.dZ(a[None, :])[0][:, axis]
    return (ch.Z(b[None, :])[0] - ch.Z(a[None, :])[0]) / lam


def solve_normal_coords(atlas: Atlas, chart: int, alpha, delta: float, h,
                        tol: float = 1e-12, max_iter: int = 100,
                        nm: DomainNorms | None = None) -> NormalCoords:
    """Solve the frame fixed-point system for the shifted representation.

    The target point is x + h with x = Z(alpha) + delta Ntilde(alpha); h is
    an ambient offset.  Iterates the divided-difference system from the
    paper-frame seed; raises SolverError if the iteration stops contracting
    (operational admissibility check, since the theoretical radius constant
    is not computable).
    """
    ch = atlas.charts[chart]
    alpha = np.asarray(alpha, float)
    h = np.asarray(h, float)
    p = ch.pdim
    t = ch.dZ(alpha[None, :])[0]          # (n, pdim)
    nt0 = _ntilde_at(ch, alpha)
    h_n, h_tau = decompose_offset(atlas, chart, alpha, h)
    target = ch.Z(alpha[None, :])[0] + (h_n + delta) * nt0 + t @ h_tau
    bold_h = np.append(h_tau, h_n + delta)
    t_sq = np.sum(t * t, axis=0)
    nt0_sq = float(nt0 @ nt0)

    if p == 2:
        dot12 = float(t[:, 0] @ t[:, 1])
        M_lim = np.array([[1.0, dot12 / t_sq[0], 0.0],
                          [dot12 / t_sq[1], 1.0, 0.0],
                          [0.0, 0.0, 1.0]])
        h_tilde = np.array([h_tau[0] + h_tau[1] * dot12 / t_sq[0],
                            h_tau[1] + h_tau[0] * dot12 / t_sq[1],
                            h_n + delta])
    else:
        M_lim = np.eye(2)
        h_tilde = np.array([h_tau[0], h_n + delta])

    def M_of(lam_vec: np.ndarray) -> np.ndarray:
        if p == 1:
            lam = lam_vec[0]
            b = alpha + np.array([lam])
            if not ch.contains_param(b[None, :], slack=0.0)[0]:
                raise ChartTransitionError("lambda left the chart domain")
            dd = _divided_diff(ch, alpha, b, lam, 0)
            ntl = _ntilde_at(ch, b)
            return np.array([[dd @ t[:, 0] / t_sq[0], ntl @ t[:, 0] / t_sq[0]],
                             [dd @ nt0 / nt0_sq, (ntl @ nt0) / nt0_sq]])
        l1, l2 = lam_vec
        a_l1 = alpha + np.array([l1, 0.0])
        a_l2 = alpha + np.array([0.0, l2])
        a_ll = alpha + np.array([l1, l2])
        for b in (a_l1, a_l2, a_ll):
            if not ch.contains_param(b[None, :], slack=0.0)[0]:
                raise ChartTransitionError("lambda left the chart domain")
        ntl = _ntilde_at(ch, a_ll)
        dd_1 = _divided_diff(ch, alpha, a_l1, l1, 0)       # along e1 from alpha
        dd_2_after1 = _divided_diff(ch, a_l1, a_ll, l2, 1)  # along e2 from alpha+l1 e1
        dd_1_after2 = _divided_diff(ch, a_l2, a_ll, l1, 0)  # along e1 from alpha+l2 e2
        dd_2 = _divided_diff(ch, alpha, a_l2, l2, 1)        # along e2 from alpha
        M = np.empty((3, 3))
        M[0, 0] = dd_1 @ t[:, 0] / t_sq[0]
        M[0, 1] = dd_2_after1 @ t[:, 0] / t_sq[0]
        M[0, 2] = ntl @ t[:, 0] / t_sq[0]
        M[1, 0] = dd_1_after2 @ t[:, 1] / t_sq[1]
        M[1, 1] = dd_2 @ t[:, 1] / t_sq[1]
        M[1, 2] = ntl @ t[:, 1] / t_sq[1]
        M[2, 0] = dd_1_after2 @ nt0 / nt0_sq
        M[2, 1] = dd_2 @ nt0 / nt0_sq
        M[2, 2] = (ntl @ nt0) / nt0_sq
        return M

    M_lim_inv = np.linalg.inv(M_lim)
    lam = bold_h.copy()
    prev_step = math.inf
    growth = 0
    it = 0
    for it in range(1, max_iter + 1):
        M = M_of(lam[:p])
        new = M_lim_inv @ ((M_lim - M) @ lam + h_tilde)
        step = float(np.linalg.norm(new - lam))
        lam = new
        if step <= tol:
            break
        if step > prev_step * 1.25:
            growth += 1
            if growth >= 5:
                raise SolverError(
                    f"fixed point not contracting: |h|={np.linalg.norm(bold_h):.3e}, "
                    f"step growth at iteration {it}")
        else:
            growth = 0
        prev_step = step
    lam_vec, mu = lam[:p], float(lam[p])
    b = alpha + lam_vec
    rec = ch.Z(b[None, :])[0] + mu * _ntilde_at(ch, b)
    residual = float(np.linalg.norm(rec - target))
    within = True
    if nm is not None:
        cut = nm.delta_cut
        within = (abs(delta) <= cut and abs(h_n) <= cut / 4.0
                  and float(np.linalg.norm(h_tau)) <= cut / 4.0)
    return NormalCoords(lmbda=lam_vec, mu=mu, residual=residual, iterations=it,
                        bold_lambda_norm=float(np.linalg.norm(lam)),
                        bold_h_norm=float(np.linalg.norm(bold_h)),
                        within_paper_cutoffs=within)


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

ON_BOUNDARY = "on_boundary"
NEAR_NORMALISH = "near_boundary_normalish"
NEAR_TANGENTIALISH = "near_boundary_tangentialish"
FAR = "far"


@dataclass
class EvalRegime:
    tag: str
    delta: float            # metric distance of the closer point
    delta_other: float      # metric distance of the farther point
    side: int
    foot: FootPoint
    h_n: float
    h_tau: np.ndarray
    swapped: bool

    @property
    def delta_coeff(self) -> float:
        return self.foot.delta_coeff


def classify_regime(atlas: Atlas, nm: DomainNorms, x, xh,
                    boundary_tol: float | None = None) -> EvalRegime:
    """Regime of the pair (x, x+h) per the near/far cutoffs.

    The closer point (after the ordering swap) drives the classification;
    points on opposite sides of the boundary are rejected since one-sided
    seminorms never pair them.
    """
    x = np.asarray(x, float)
    xh = np.asarray(xh, float)
    tol = boundary_tol if boundary_tol is not None else 1e-9 * nm.diam
    f1 = nearest_boundary_point(atlas, x)
    f2 = nearest_boundary_point(atlas, xh)
    s1 = 0 if f1.dist <= tol else f1.side
    s2 = 0 if f2.dist <= tol else f2.side
    if s1 * s2 < 0:
        raise ClassificationError("points lie on opposite sides of the boundary")
    swapped = f2.dist < f1.dist
    if swapped:
        x, xh = xh, x
        f1, f2 = f2, f1
    side = s1 if s1 != 0 else s2
    h = xh - x
    if f1.dist <= tol and f2.dist <= tol:
        return EvalRegime(tag=ON_BOUNDARY, delta=f1.dist, delta_other=f2.dist,
                          side=0, foot=f1, h_n=0.0,
                          h_tau=np.zeros(atlas.pdim), swapped=swapped)
    h_n, h_tau = decompose_offset(atlas, f1.chart, f1.alpha, h)
    if f1.dist >= nm.far_cut:
        tag = FAR
    else:
        ratio = 0.25 * nm.dz_inf / nm.lip
        tag = (NEAR_NORMALISH
               if np.linalg.norm(h_tau) <= ratio * f1.delta_coeff
               else NEAR_TANGENTIALISH)
    return EvalRegime(tag=tag, delta=f1.dist, delta_other=f2.dist, side=side,
                      foot=f1, h_n=h_n, h_tau=np.atleast_1d(h_tau), swapped=swapped)


# ---------------------------------------------------------------------------
# admissible-case sampling and the h_n floor report
# ---------------------------------------------------------------------------

@dataclass
class AdmissibleCase:
    chart: int
    alpha: np.ndarray
    delta: float
    h: np.ndarray
    h_n: float
    h_tau: np.ndarray
    coords: NormalCoords


@dataclass
class FloorReport:
    checked: int
    violations: int
    worst_margin: float


def sample_admissible_cases(atlas: Atlas, nm: DomainNorms, count: int,
                            rng: np.random.Generator,
                            scale: float = 1.0) -> list[AdmissibleCase]:
    """Random cases within the paper cutoffs and the distance-ordering convention.

    Ordering (x the closer point) is enforced through the height comparison
    mu |Ntilde(alpha+lambda)| >= delta |Ntilde(alpha)|, which at cutoff
    scales matches the metric ordering to O(delta^2 / reach).  ``scale``
    shrinks all offsets below the cutoffs (e.g. 0.5 for the contraction-rate
    study at half threshold).
    """
    cut = nm.delta_cut * scale
    cases: list[AdmissibleCase] = []
    attempts = 0
    while len(cases) < count and attempts < 50 * count + 100:
        attempts += 1
        ci = int(rng.integers(len(atlas.charts)))
        ch = atlas.charts[ci]
        alpha = np.array([rng.uniform(l, h) for l, h in
                          zip(ch.tile_lo * 0.8, ch.tile_hi * 0.8)])
        delta = rng.uniform(0.1, 1.0) * cut
        h_n = rng.uniform(-1.0, 1.0) * cut / 4.0
        tau = rng.normal(size=ch.pdim)
        tau *= rng.uniform(0.0, 1.0) * (cut / 4.0) / max(np.linalg.norm(tau), 1e-300)
        t = ch.dZ(alpha[None, :])[0]
        nt = _ntilde_at(ch, alpha)
        h = h_n * nt + t @ tau
        coords = solve_normal_coords(atlas, ci, alpha, delta, h, nm=nm)
        ntl = _ntilde_at(ch, alpha + coords.lmbda)
        if coords.mu * np.linalg.norm(ntl) < delta * np.linalg.norm(nt):
            continue
        cases.append(AdmissibleCase(chart=ci, alpha=alpha, delta=delta, h=h,
                                    h_n=h_n, h_tau=tau, coords=coords))
    if len(cases) < count:
        raise SolverError("could not sample enough admissible cases")
    return cases


def hn_floor_check(cases: list[AdmissibleCase]) -> FloorReport:
    """Assert h_n >= -delta/4 - |h_tau|/4 on ordered admissible cases."""
    worst = math.inf
    bad = 0
    for c in cases:
        floor = -c.delta / 4.0 - float(np.linalg.norm(c.h_tau)) / 4.0
        margin = c.h_n - floor
        worst = min(worst, margin)
        if margin < 0:
            bad += 1
    return FloorReport(checked=len(cases), violations=bad, worst_margin=worst)
