"""Command-line front end: reproducible experiments with CSV/JSON reports.

Subcommands: norms, eval, profile, holder-scan, scaling-study,
oracle-check, classify.  Exit codes: 0 success, 2 configuration error,
3 numerical failure (the failing probe is serialized into the report).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import reports
from .config import ConfigError, RunConfig
from .geometry import GeometryError, build_domain, norms
from .holder import (EXTERIOR, FAR, INTERIOR, NEAR, ON_BOUNDARY, PairConfig,
                     fit_log_profile, holder_scan, linearity_study, linf_profile)
from .kernels import KernelError, resolve_kernel
from .normalcoords import ClassificationError, SolverError, classify_regime
from .sboundary import SurfaceQuadConfig, t_from_boundary
from .svolume import (ConvergenceError, GridOracleConfig, PvSchedule,
                      QuadConfig, t_fourier_oracle, t_volume_pv)

OK, CONFIG_ERROR, NUMERICAL_ERROR = 0, 2, 3


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("missing --config <path>")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.overrides["seed"] = args.seed
    if args.workers is not None:
        cfg.overrides["workers"] = args.workers
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _surface_cfg(cfg: RunConfig) -> SurfaceQuadConfig:
    return SurfaceQuadConfig(
        base_panels=cfg.get_int("base_panels", 8),
        panel_order=cfg.get_int("panel_order", 4),
        theta_refine=cfg.get_float("theta_refine", 0.35))


def _pair_cfg(cfg: RunConfig) -> PairConfig:
    return PairConfig(
        n_pairs=cfg.get_int("n_pairs", 400),
        h_min=cfg.get_float("h_min", 1e-3),
        h_max=cfg.get_float("h_max", 1e-1),
        h_strata=cfg.get_int("h_strata", 12),
        seed=cfg.seed())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_norms(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    sweep = cfg.get_floats("eps_b_list", default="") if cfg._get("eps_b_list") else None
    fams = []
    if sweep:
        base = cfg.family()
        from .geometry import DomainFamily
        fams = [DomainFamily(base.family, radius=base.radius, radii=base.radii,
                             bump_amplitude=e, bump_frequency=base.bump_frequency)
                for e in sweep]
    else:
        fams = [cfg.family()]
    for fam in fams:
        atlas = build_domain(fam)
        nm = norms(atlas, cfg.sigma(), cfg.sampling())
        tag = f"_eps{fam.bump_amplitude:g}" if sweep else ""
        payload = {"family": fam.label(), **nm.as_dict()}
        path = reports.write_json(out / f"norms{tag}.json", payload)
        print(f"wrote {path}")
    return OK


def _read_points(path: Path, ndim: int) -> np.ndarray:
    if not path.exists():
        raise ConfigError(f"points file not found: {path}")
    rows = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or line.lower().startswith(("x,", "x ")):
            continue
        vals = [float(s) for s in line.replace(";", ",").split(",") if s.strip()]
        rows.append(vals)
    if not rows:
        raise ConfigError(f"points file is empty: {path}")
    pts = np.asarray(rows, float)
    if pts.shape[1] != ndim:
        raise ConfigError(
            f"points file has {pts.shape[1]} columns, domain dimension is {ndim}")
    return pts


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    kernel = resolve_kernel(args.kernel or cfg.kernels()[0])
    atlas = build_domain(cfg.family())
    pts = _read_points(Path(args.points or cfg.get_str("points")), atlas.ndim)
    rows = []
    for x in pts:
        try:
            r = t_volume_pv(kernel, atlas, x)
        except ConvergenceError as exc:
            reports.write_json(out / "eval_failure.json",
                               {"point": x.tolist(), "error": str(exc),
                                "series": getattr(exc, "series", None)})
            print(f"numerical failure at {x}: {exc}", file=sys.stderr)
            return NUMERICAL_ERROR
        rows.append(list(x) + [r.value, r.err_est])
    header = list("xyz"[:atlas.ndim]) + ["value", "err_est"]
    path = reports.write_csv(out / "eval.csv", header, rows)
    print(f"wrote {path}")
    if not args.no_figures:
        reports.eval_points_figure(out / "eval.png", pts,
                                   [r[-2] for r in rows], kernel.name)
    return OK


def _parse_ray(spec: str) -> dict:
    fields = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        fields[key.strip().lower()] = val.strip()
    missing = {"alpha", "side", "deltas"} - set(fields)
    if missing:
        raise ConfigError(f"--ray missing fields: {sorted(missing)} "
                          "(format: chart=0;alpha=a1,a2;side=interior;deltas=...)")
    return fields


def cmd_profile(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    kernel = resolve_kernel(args.kernel or cfg.kernels()[0])
    atlas = build_domain(cfg.family())
    if args.ray:
        ray = _parse_ray(args.ray)
        chart = int(ray.get("chart", "0"))
        alpha = np.array([float(s) for s in ray["alpha"].split(",")])
        side = ray["side"]
        deltas = np.array([float(s) for s in ray["deltas"].split(",")])
    else:
        chart = cfg.get_int("chart", 0)
        alpha = np.array(cfg.get_floats("alpha", "0.2,0.3"))[:atlas.pdim]
        side = cfg.get_str("side", INTERIOR)
        deltas = np.array(cfg.get_floats("deltas", "0.001,0.002,0.005,0.01,0.02,0.05,0.1"))
    if side not in (INTERIOR, EXTERIOR):
        raise ConfigError(f"field side: must be interior|exterior, got {side!r}")
    try:
        prof = linf_profile(kernel, atlas, chart, alpha, side, deltas)
    except ConvergenceError as exc:
        reports.write_json(out / "profile_failure.json", {"error": str(exc)})
        return NUMERICAL_ERROR
    path = reports.write_csv(out / "profile.csv", ["delta", "value"],
                             prof.as_rows())
    reports.write_json(out / "profile.json", {
        "kernel": kernel.name, "side": side, "c1": prof.c1, "c2": prof.c2,
        "r2": prof.r2, "classification": prof.classification,
        "even_threshold": prof.even_threshold})
    print(f"wrote {path} [{prof.classification}]")
    if not args.no_figures:
        reports.profile_figure(out / "profile.png", prof.deltas, prof.values,
                               prof.c1, prof.c2, prof.r2, prof.classification,
                               kernel.name)
    return OK


def cmd_holder_scan(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    kernel = resolve_kernel(args.kernel or cfg.kernels()[0])
    atlas = build_domain(cfg.family())
    nm = norms(atlas, cfg.sigma(), cfg.sampling())
    rep = holder_scan(kernel, atlas, nm, cfg.sigma(), _pair_cfg(cfg),
                      _surface_cfg(cfg), workers=cfg.get_int("workers", 1))
    rows = []
    for (regime, side), res in rep.per_regime.items():
        for p in res.pairs:
            rows.append([regime, side, p.h_norm, p.ux, p.uxh,
                         p.quotient(cfg.sigma())])
    path = reports.write_csv(out / "holder_scan.csv",
                             ["regime", "side", "h", "u_x", "u_xh", "quotient"],
                             rows)
    summary = {"kernel": kernel.name, "sigma": cfg.sigma(),
               "bound_factor": rep.bound_factor, "seminorm": rep.seminorm,
               "ratio": rep.ratio,
               "per_regime": {f"{r}/{s}": {"max": v.max_quotient,
                                           "top_decile": v.top_decile,
                                           "n_pairs": v.n_pairs}
                              for (r, s), v in rep.per_regime.items()}}
    reports.write_json(out / "holder_scan.json", summary)
    print(f"wrote {path}")
    if not args.no_figures:
        reports.scan_figure(out / "holder_scan.png", rep.per_regime, cfg.sigma())
    return OK


def cmd_scaling_study(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    kernel = resolve_kernel(args.kernel or cfg.kernels()[0])
    fam = cfg.family()
    eps_list = cfg.get_floats("eps_b_list", "0,0.01,0.02,0.05")
    study = linearity_study(kernel, fam.family if "bump" in fam.family
                            else "bumped_sphere", eps_list, cfg.sigma(),
                            radius=fam.radius, frequency=fam.bump_frequency,
                            cfg=_pair_cfg(cfg), sampling=cfg.sampling(),
                            surf_cfg=_surface_cfg(cfg),
                            workers=cfg.get_int("workers", 1))
    rows = [[r.eps_b, r.holder_1s, r.area, r.seminorm, r.bound_factor, r.ratio]
            for r in study.rows]
    path = reports.write_csv(out / "scaling_study.csv",
                             ["eps_b", "holder_1s", "area", "seminorm",
                              "bound_factor", "ratio"], rows)
    reports.write_json(out / "scaling_study.json", {
        "kernel": kernel.name, "slope": study.slope,
        "intercept": study.intercept, "r2": study.r2,
        "ratio_band": study.ratio_band,
        "band_ok": study.ratio_band <= 3.0})
    print(f"wrote {path} (ratio band {study.ratio_band:.2f}x)")
    if not args.no_figures:
        reports.study_figure(out / "scaling_study.png", study.rows,
                             study.slope, study.intercept)
    return OK


def cmd_oracle_check(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    cfg.copy_into(out)
    atlas = build_domain(cfg.family())
    tol_vb = cfg.get_float("tol_volume_boundary", 1e-3)
    tol_fft = cfg.get_float("tol_fft", 1e-2)
    n_probes = cfg.get_int("n_probes", 20)
    rng = np.random.default_rng(cfg.seed())
    diam = atlas.diam()
    probes = _probe_points(atlas, n_probes, rng, min_dist=0.1 * diam)
    results = []
    overall_ok = True
    for name in cfg.kernels():
        kernel = resolve_kernel(name)
        if kernel.parity != "even":
            continue
        vol = np.array([t_volume_pv(kernel, atlas, x).value for x in probes])
        bnd = np.array([t_from_boundary(kernel, atlas, x, _surface_cfg(cfg))
                        for x in probes])
        floor = 1e-9 + 0.05 * float(np.max(np.abs(vol)))
        rel = np.abs(bnd - vol) / np.maximum(np.abs(vol), floor)
        ok = bool(np.max(rel) <= tol_vb)
        overall_ok &= ok
        entry = {"kernel": name, "max_rel_volume_boundary": float(np.max(rel)),
                 "tol": tol_vb, "ok": ok}
        if cfg._get("fft_resolution") is not None:
            res = cfg.get_int("fft_resolution")
            box = cfg.get_float("fft_box", 4.0 * diam)
            orc = t_fourier_oracle(kernel, atlas, GridOracleConfig(
                box_side=box, resolution=res, subcell=4, smoothing_cells=1.0))
            gp = orc.grid_points(orc.grid_index(probes))
            keep = np.array([bool(np.min(np.abs(
                atlas.implicit.signed_radial_excess(p[None, :]))) >
                3.0 * orc.spacing) for p in gp])
            fft_vals = orc.sample(gp[keep])
            vol2 = np.array([t_volume_pv(kernel, atlas, p).value for p in gp[keep]])
            floor2 = 1e-9 + 0.05 * float(np.max(np.abs(vol2)))
            rel2 = np.abs(fft_vals - vol2) / np.maximum(np.abs(vol2), floor2)
            ok2 = bool(np.max(rel2) <= tol_fft)
            overall_ok &= ok2
            entry.update({"max_rel_fft": float(np.max(rel2)), "tol_fft": tol_fft,
                          "fft_ok": ok2, "n_fft_points": int(keep.sum())})
        results.append(entry)
    reports.write_json(out / "oracle_check.json",
                       {"domain": cfg.family().label(), "results": results,
                        "ok": overall_ok})
    print(f"oracle-check: {'pass' if overall_ok else 'FAIL'}")
    return OK if overall_ok else NUMERICAL_ERROR


def _probe_points(atlas, count, rng, min_dist):
    """Half interior, half exterior probes at distance >= min_dist."""
    star = atlas.implicit
    diam = atlas.diam()
    pts = []
    while len(pts) < count // 2:
        u = rng.normal(size=atlas.ndim)
        u /= np.linalg.norm(u)
        r = star.radial(u[None, :])[0]
        frac = rng.uniform(0.05, 1.0)
        x = star.center + u * frac * max(r - min_dist, 0.02 * diam)
        if abs(star.signed_radial_excess(x[None, :])[0]) >= min_dist * 0.999:
            pts.append(x)
    while len(pts) < count:
        u = rng.normal(size=atlas.ndim)
        u /= np.linalg.norm(u)
        r = star.radial(u[None, :])[0]
        x = star.center + u * (r + rng.uniform(min_dist, 0.6 * diam))
        pts.append(x)
    return np.array(pts)


def cmd_classify(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    atlas = build_domain(cfg.family())
    nm = norms(atlas, cfg.sigma(), cfg.sampling())
    x = np.array([float(s) for s in args.x.split(",")])
    xh = np.array([float(s) for s in args.xh.split(",")])
    try:
        reg = classify_regime(atlas, nm, x, xh)
    except ClassificationError as exc:
        reports.write_json(out / "classify.json", {"error": str(exc)})
        print(f"classification error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    payload = {"tag": reg.tag, "delta": reg.delta, "delta_other": reg.delta_other,
               "side": reg.side, "h_n": reg.h_n, "h_tau": reg.h_tau.tolist(),
               "swapped": reg.swapped, "foot_chart": reg.foot.chart,
               "foot_alpha": reg.foot.alpha.tolist()}
    path = reports.write_json(out / "classify.json", payload)
    print(f"wrote {path} [{reg.tag}]")
    return OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="czpatch",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key=value config file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", help="output directory (default ./out)")
    ap.add_argument("--no-figures", action="store_true",
                    help="skip PNG rendering next to CSV outputs")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("norms", help="domain norms and cutoffs -> JSON")
    p = sub.add_parser("eval", help="pointwise pv values -> CSV")
    p.add_argument("--kernel")
    p.add_argument("--points", help="CSV of evaluation points")
    p = sub.add_parser("profile", help="normal-ray profile + log fit -> CSV/JSON")
    p.add_argument("--kernel")
    p.add_argument("--ray", help="chart=0;alpha=a1,a2;side=interior;deltas=d1,d2,...")
    p = sub.add_parser("holder-scan", help="per-regime Holder quotients -> CSV/JSON")
    p.add_argument("--kernel")
    p = sub.add_parser("scaling-study", help="seminorm vs boundary norm -> CSV/JSON")
    p.add_argument("--kernel")
    sub.add_parser("oracle-check", help="cross-method comparison -> JSON")
    p = sub.add_parser("classify", help="regime of a point pair -> JSON")
    p.add_argument("--x", required=True)
    p.add_argument("--xh", required=True)
    return ap


_COMMANDS = {
    "norms": cmd_norms,
    "eval": cmd_eval,
    "profile": cmd_profile,
    "holder-scan": cmd_holder_scan,
    "scaling-study": cmd_scaling_study,
    "oracle-check": cmd_oracle_check,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name in ("kernel", "points", "ray", "x", "xh"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, KernelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (ConvergenceError, SolverError, GeometryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
