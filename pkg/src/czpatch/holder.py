"""Empirical Holder-regularity studies for the boundary and volume operators.

The studies sample admissible point pairs per regime (on-boundary pv pairs,
near-boundary same-side pairs, far pairs), evaluate the operator, and take
the max of |u(x) - u(x+h)| / |h|^sigma.  The sampled sup over finitely many
pairs is a lower bound on the true seminorm and is reported as such.
Structural bound factors only contain the computable part of the estimates;
the unspecified constant is what the ratio/band studies quantify.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .geometry import Atlas, DomainFamily, DomainNorms, SamplingConfig, build_domain, norms
from .kernels import HomogeneousKernel
from .normalcoords import nearest_boundary_point
from .sboundary import SurfaceQuadConfig, t_from_boundary
from .svolume import PvSchedule, QuadConfig, t_volume_pv

ON_BOUNDARY = "on_boundary"
NEAR = "near"
FAR = "far"
REGIMES = (ON_BOUNDARY, NEAR, FAR)
INTERIOR, EXTERIOR = "interior", "exterior"


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------

@dataclass
class PairConfig:
    """Pair-generation bands: |h| in absolute length, deltas relative to diam.

    The paper-literal near/far cutoffs are microscopic for smooth domains
    (they scale like (dz_inf/18 holder)^(1/sigma)), so the study strata use
    operational bands; the literal cutoffs remain available in DomainNorms.
    """

    n_pairs: int = 400
    h_min: float = 1e-3
    h_max: float = 1e-1
    near_delta: tuple[float, float] = (5e-4, 2e-2)
    far_delta: tuple[float, float] = (8e-2, 0.2)
    h_strata: int = 12
    seed: int = 1234


@dataclass
class PairSample:
    regime: str
    side: str
    x: np.ndarray
    xh: np.ndarray
    h_norm: float
    ux: float = math.nan
    uxh: float = math.nan

    def quotient(self, sigma: float) -> float:
        return abs(self.ux - self.uxh) / self.h_norm**sigma


@dataclass
class SeminormResult:
    regime: str
    side: str
    sigma: float
    max_quotient: float
    top_decile: float
    n_pairs: int
    pairs: list = field(default_factory=list)

    def band_max(self, sigma_band) -> float:
        lo, hi = sigma_band
        vals = [p.quotient(self.sigma) for p in self.pairs if lo <= p.h_norm <= hi]
        return max(vals) if vals else 0.0


@dataclass
class HolderReport:
    per_regime: dict
    bound_factor: float
    seminorm: float

    @property
    def ratio(self) -> float:
        return self.seminorm / self.bound_factor


# ---------------------------------------------------------------------------
# pair generation
# ---------------------------------------------------------------------------

def _surface_frames(atlas: Atlas, count: int, seed: int):
    """Quasi-random boundary frames: (point, unit inward normal)."""
    pts, nus = [], []
    per = max(count // len(atlas.charts) + 1, 1)
    for ci, ch in enumerate(atlas.charts):
        h = qmc.Halton(d=ch.pdim, scramble=False, seed=seed + ci)
        a = ch.tile_lo + (ch.tile_hi - ch.tile_lo) * h.random(per)
        z = ch.Z(a)
        from .geometry import normal_unchecked
        n = normal_unchecked(ch, a)
        nus.append(n / np.linalg.norm(n, axis=1, keepdims=True))
        pts.append(z)
    pts = np.concatenate(pts)[:count]
    nus = np.concatenate(nus)[:count]
    return pts, nus


def _h_magnitudes(cfg: PairConfig, k: int, rng: np.random.Generator) -> float:
    """Stratified log-spaced |h| values covering [h_min, h_max] inclusively."""
    s = cfg.h_strata
    frac = (k % s) / max(s - 1, 1)
    base = cfg.h_max * (cfg.h_min / cfg.h_max) ** frac
    if k < s:  # first sweep hits the strata endpoints exactly
        return base
    return base * rng.uniform(0.75, 1.0)


_CANONICAL = {
    3: np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1],
                 [-1, 0, 0], [0, -1, 0], [0, 0, -1]], float),
    2: np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], float),
}


def _direction(ndim: int, k: int, rng: np.random.Generator) -> np.ndarray:
    canon = _CANONICAL[ndim]
    if k < len(canon):
        return canon[k]
    v = rng.normal(size=ndim)
    return v / np.linalg.norm(v)


def generate_pairs(atlas: Atlas, nm: DomainNorms, regime: str, side: str,
                   cfg: PairConfig) -> list[PairSample]:
    """Admissible same-side pairs for one regime stratum.

    Both points of a near/far pair stay in the regime's distance band on the
    requested side; on-boundary pairs are boundary points (pv evaluation).
    """
    rng = np.random.default_rng(cfg.seed + zlib.crc32(f"{regime}/{side}".encode()))
    diam = nm.diam
    # fixed-size foot pool so runs with different n_pairs share a prefix
    feet, nus = _surface_frames(atlas, 4096, cfg.seed)
    sgn = 1.0 if side == INTERIOR else -1.0
    out: list[PairSample] = []
    tries = 0
    k = 0
    while len(out) < cfg.n_pairs and tries < 40 * cfg.n_pairs:
        tries += 1
        i = int(rng.integers(len(feet)))
        hmag = _h_magnitudes(cfg, k, rng)
        if regime == ON_BOUNDARY:
            # walk along the boundary: project the stepped point back
            d = _direction(atlas.ndim, k, rng)
            d = d - (d @ nus[i]) * nus[i]
            if np.linalg.norm(d) < 1e-9:
                continue
            d /= np.linalg.norm(d)
            f2 = nearest_boundary_point(atlas, feet[i] + hmag * d)
            x, xh = feet[i], f2.point
            hn = float(np.linalg.norm(xh - x))
            if not (0.35 * hmag <= hn <= 2.0 * hmag):
                continue
            out.append(PairSample(regime, "pv", x, xh, hn))
            k += 1
            continue
        lo, hi = (cfg.near_delta if regime == NEAR else cfg.far_delta)
        lo, hi = lo * diam, hi * diam
        d1 = lo * (hi / lo) ** rng.uniform()
        x = feet[i] + sgn * d1 * nus[i]
        if regime == NEAR:
            # mostly-tangential step keeps the pair inside the near band
            t = _direction(atlas.ndim, k, rng)
            t = t - (t @ nus[i]) * nus[i]
            if np.linalg.norm(t) < 1e-9:
                continue
            t /= np.linalg.norm(t)
            frac_n = rng.uniform(-0.2, 0.6)
            step = t * math.sqrt(max(1 - frac_n**2, 0.0)) + sgn * frac_n * nus[i]
            xh = x + hmag * step
        else:
            dvec = _direction(atlas.ndim, k, rng)
            xh = x + hmag * dvec
        f2 = nearest_boundary_point(atlas, xh)
        side2 = f2.side if f2.dist > 1e-12 * diam else 0
        want = 1 if side == INTERIOR else -1
        if side2 != want or not (lo * 0.5 <= f2.dist <= hi * 1.5):
            continue
        hn = float(np.linalg.norm(xh - x))
        if hn < cfg.h_min * 0.5:
            continue
        out.append(PairSample(regime, side, x, xh, hn))
        k += 1
    if len(out) < cfg.n_pairs:
        raise RuntimeError(
            f"could only generate {len(out)}/{cfg.n_pairs} pairs for "
            f"{regime}/{side}")
    return out


# ---------------------------------------------------------------------------
# seminorm estimation
# ---------------------------------------------------------------------------

def _evaluate_pairs(pairs: list[PairSample], u_eval, workers: int = 1) -> None:
    pts = []
    for p in pairs:
        pts.append(p.x)
        pts.append(p.xh)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(u_eval, pts))
    else:
        vals = [u_eval(p) for p in pts]
    for i, p in enumerate(pairs):
        p.ux = float(vals[2 * i])
        p.uxh = float(vals[2 * i + 1])


def empirical_seminorm(u_eval, atlas: Atlas, nm: DomainNorms, sigma: float,
                       regime: str, side: str = INTERIOR,
                       cfg: PairConfig | None = None, workers: int = 1,
                       pairs: list[PairSample] | None = None) -> SeminormResult:
    """Sampled lower bound on the one-sided Holder seminorm of u.

    ``u_eval`` maps a point to a value and must be deterministic; failures
    propagate with the offending pair attached.
    """
    cfg = cfg or PairConfig()
    if pairs is None:
        pairs = generate_pairs(atlas, nm, regime, side, cfg)
    try:
        _evaluate_pairs(pairs, u_eval, workers)
    except Exception as exc:
        raise RuntimeError(f"evaluator failed during {regime}/{side} scan") from exc
    quots = np.array([p.quotient(sigma) for p in pairs])
    order = np.sort(quots)
    top_decile = float(order[int(0.9 * (len(order) - 1))])
    return SeminormResult(regime=regime, side=side, sigma=sigma,
                          max_quotient=float(np.max(quots)),
                          top_decile=top_decile, n_pairs=len(pairs), pairs=pairs)


def make_t_evaluator(kernel: HomogeneousKernel, atlas: Atlas,
                     surf_cfg: SurfaceQuadConfig | None = None):
    """T(1_D) via the boundary reduction (pv at boundary points)."""
    cfg = surf_cfg or SurfaceQuadConfig()

    def u(x):
        return t_from_boundary(kernel, atlas, x, cfg)

    return u


def make_volume_evaluator(kernel: HomogeneousKernel, atlas: Atlas,
                          quad: QuadConfig | None = None,
                          schedule: PvSchedule | None = None):
    def u(x):
        return t_volume_pv(kernel, atlas, x, schedule, quad).value

    return u


# ---------------------------------------------------------------------------
# structural bound factors
# ---------------------------------------------------------------------------

def sample_density_norms(atlas: Atlas, f, sigma: float, n_samples: int = 2048,
                         n_pairs: int = 8192, seed: int = 7):
    """(sup |f|, Holder-sigma seminorm of f) over surface samples/pairs."""
    pts, nus = _surface_frames(atlas, n_samples, seed)
    idx, al = atlas.invert(pts)
    vals = f.eval(pts, nus * 1.0, idx, al)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(pts), size=n_pairs)
    j = rng.integers(0, len(pts), size=n_pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    sep = np.linalg.norm(pts[i] - pts[j], axis=1)
    ok = sep > 1e-12
    quot = np.abs(vals[i][ok] - vals[j][ok]) / sep[ok]**sigma
    return float(np.max(np.abs(vals))), float(np.max(quot))


def bound_factor(nm: DomainNorms, mode: str, f_sup: float = 1.0,
                 f_holder: float = 0.0) -> float:
    """Computable factor of the theorem's right-hand side.

    mode "S": (1 + |dD|) (||f||_{C^sigma} + ||f||_inf ||D||_{C^{1+sigma}});
    mode "T": (1 + |dD|) (1 + ||D||_{C^{1+sigma}}).  The unspecified
    C(n,sigma) P(star + lip) prefactor is never synthesized.
    """
    if mode == "T":
        return (1.0 + nm.area) * (1.0 + nm.holder_1s)
    if mode == "S":
        f_csigma = f_sup + f_holder
        return (1.0 + nm.area) * (f_csigma + f_sup * nm.holder_1s)
    raise ValueError(f"mode must be 'S' or 'T', got {mode!r}")


# ---------------------------------------------------------------------------
# scans and studies
# ---------------------------------------------------------------------------

def holder_scan(kernel: HomogeneousKernel, atlas: Atlas, nm: DomainNorms,
                sigma: float, cfg: PairConfig | None = None,
                surf_cfg: SurfaceQuadConfig | None = None,
                regimes=REGIMES, sides=(INTERIOR, EXTERIOR),
                workers: int = 1) -> HolderReport:
    """Per-regime seminorm scan of T(1_D) for an even catalog kernel."""
    cfg = cfg or PairConfig()
    u = make_t_evaluator(kernel, atlas, surf_cfg)
    per: dict[tuple, SeminormResult] = {}
    for regime in regimes:
        the_sides = ("pv",) if regime == ON_BOUNDARY else sides
        for side in the_sides:
            res = empirical_seminorm(u, atlas, nm, sigma, regime,
                                     side if side != "pv" else INTERIOR,
                                     cfg, workers)
            res.side = side
            per[(regime, side)] = res
    semi = max(r.max_quotient for r in per.values())
    return HolderReport(per_regime=per, bound_factor=bound_factor(nm, "T"),
                        seminorm=semi)


@dataclass
class StudyRow:
    eps_b: float
    holder_1s: float
    area: float
    seminorm: float
    bound_factor: float
    ratio: float
    per_regime: dict


@dataclass
class StudyResult:
    rows: list[StudyRow]
    slope: float
    intercept: float
    r2: float

    @property
    def ratio_band(self) -> float:
        ratios = [r.ratio for r in self.rows if r.seminorm > 0]
        return max(ratios) / min(ratios) if ratios else math.inf


def linearity_study(kernel: HomogeneousKernel, family: str, eps_b_list,
                    sigma: float, radius: float = 1.0, frequency: int = 3,
                    cfg: PairConfig | None = None,
                    sampling: SamplingConfig | None = None,
                    surf_cfg: SurfaceQuadConfig | None = None,
                    regimes=REGIMES, workers: int = 1) -> StudyResult:
    """Seminorm growth across the bumped family vs the boundary regularity.

    Returns one row per bump amplitude plus the seminorm-vs-holder_1s
    regression; the ratio column uses the corollary factor
    (1+|dD|)(1+||D||_{C^{1+sigma}}).
    """
    rows = []
    for eps_b in eps_b_list:
        fam = DomainFamily(family, radius=radius, bump_amplitude=eps_b,
                           bump_frequency=frequency)
        atlas = build_domain(fam)
        nm = norms(atlas, sigma, sampling)
        rep = holder_scan(kernel, atlas, nm, sigma, cfg, surf_cfg,
                          regimes=regimes, workers=workers)
        rows.append(StudyRow(eps_b=eps_b, holder_1s=nm.holder_1s, area=nm.area,
                             seminorm=rep.seminorm, bound_factor=rep.bound_factor,
                             ratio=rep.ratio, per_regime=rep.per_regime))
    xs = np.array([r.holder_1s for r in rows])
    ys = np.array([r.seminorm for r in rows])
    A = np.vstack([np.ones_like(xs), xs]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return StudyResult(rows=rows, slope=float(coef[1]), intercept=float(coef[0]),
                       r2=r2)


# ---------------------------------------------------------------------------
# normal-ray profiles (L^infty vs log divergence)
# ---------------------------------------------------------------------------

@dataclass
class ProfileResult:
    deltas: np.ndarray
    values: np.ndarray
    c1: float
    c2: float
    r2: float
    classification: str  # bounded | log_divergent | inconclusive
    even_threshold: float

    def as_rows(self):
        return list(zip(self.deltas.tolist(), self.values.tolist()))


def fit_log_profile(deltas, values) -> tuple[float, float, float]:
    """Least-squares fit value = c1 + c2 log(1/delta); returns (c1, c2, R^2)."""
    d = np.asarray(deltas, float)
    v = np.asarray(values, float)
    A = np.vstack([np.ones_like(d), np.log(1.0 / d)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - np.mean(v)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def linf_profile(kernel: HomogeneousKernel, atlas: Atlas, chart: int, alpha,
                 side: str, deltas, quad: QuadConfig | None = None,
                 bounded_rel: float = 0.02, bounded_abs: float = 0.01,
                 r2_min: float = 0.99) -> ProfileResult:
    """T(1_D) along the normal ray, with the bounded/log-divergent fit.

    Classification: bounded when |c2| <= bounded_rel |c1| + bounded_abs;
    log-divergent when the fit is tight (R^2 >= r2_min) and c2 clears five
    times that threshold.
    """
    ch = atlas.charts[chart]
    alpha = np.asarray(alpha, float)
    z = ch.Z(alpha[None, :])[0]
    from .geometry import normal_unchecked
    n = normal_unchecked(ch, alpha[None, :])[0]
    nu = n / np.linalg.norm(n)
    sgn = 1.0 if side == INTERIOR else -1.0
    deltas = np.asarray(sorted(deltas), float)
    vals = []
    for d in deltas:
        x = z + sgn * d * nu
        vals.append(t_volume_pv(kernel, atlas, x, quad=quad,
                                foot_hint=(sgn * nu, d)).value)
    vals = np.asarray(vals)
    c1, c2, r2 = fit_log_profile(deltas, vals)
    thresh = bounded_rel * abs(c1) + bounded_abs
    if abs(c2) <= thresh:
        cls = "bounded"
    elif r2 >= r2_min and abs(c2) >= 5.0 * thresh:
        cls = "log_divergent"
    else:
        cls = "inconclusive"
    return ProfileResult(deltas=deltas, values=vals, c1=c1, c2=c2, r2=r2,
                         classification=cls, even_threshold=thresh)
