"""CSV / JSON report writers and the figure rendering beside them.

CSV is the machine contract; every report command also renders a PNG of
the same data next to the delimited output (disable with --no-figures).
Outputs are byte-deterministic for a fixed config and seed, except for the
single timestamp entry (one header line in CSV, one field in JSON).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# generated: {_stamp()}", ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    payload["timestamp"] = _stamp()
    path.write_text(json.dumps(payload, indent=1, sort_keys=True,
                               default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def strip_timestamp(text: str) -> str:
    """Remove the single volatile line for byte-determinism comparisons."""
    lines = [ln for ln in text.splitlines()
             if not ln.startswith("# generated:") and '"timestamp"' not in ln]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def profile_figure(path, deltas, values, c1, c2, r2, classification,
                   kernel: str) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(deltas, values, "o", label="computed")
    dd = np.geomspace(min(deltas), max(deltas), 200)
    ax.semilogx(dd, c1 + c2 * np.log(1.0 / dd), "-",
                label=f"fit c1+c2 log(1/d)  (R2={r2:.4f})")
    ax.set_xlabel("distance to boundary")
    ax.set_ylabel("T(1_D)")
    ax.set_title(f"{kernel}: normal-ray profile [{classification}]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def scan_figure(path, results, sigma: float) -> Path:
    """Quotient-vs-separation scatter per regime/side."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for (regime, side), res in results.items():
        hs = [p.h_norm for p in res.pairs]
        qs = [p.quotient(sigma) for p in res.pairs]
        ax.loglog(hs, qs, ".", ms=3, label=f"{regime}/{side}")
    ax.set_xlabel("|h|")
    ax.set_ylabel(f"|u(x+h)-u(x)| / |h|^{sigma}")
    ax.set_title("Holder quotients by regime")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def study_figure(path, rows, slope, intercept) -> Path:
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    xs = np.array([r.holder_1s for r in rows])
    ys = np.array([r.seminorm for r in rows])
    axes[0].plot(xs, ys, "o")
    xx = np.linspace(0, max(xs) * 1.05, 50)
    axes[0].plot(xx, intercept + slope * xx, "-",
                 label=f"fit slope={slope:.3g}")
    axes[0].set_xlabel("boundary C^{1+sigma} seminorm")
    axes[0].set_ylabel("empirical seminorm of T(1_D)")
    axes[0].legend()
    axes[1].plot([r.eps_b for r in rows], [r.ratio for r in rows], "s-")
    axes[1].set_xlabel("bump amplitude")
    axes[1].set_ylabel("seminorm / bound factor")
    axes[1].set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def eval_points_figure(path, points, values, kernel: str) -> Path:
    path = Path(path)
    pts = np.asarray(points)
    fig, ax = plt.subplots(figsize=(6, 4))
    r = np.linalg.norm(pts, axis=1)
    ax.plot(r, values, "o", ms=4)
    ax.set_xlabel("|x|")
    ax.set_ylabel("T(1_D)(x)")
    ax.set_title(f"{kernel}: point evaluations")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
