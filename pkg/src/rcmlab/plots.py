"""SVG figures rendered from persisted CSV tables.

Rendering never recomputes statistics: every plotter reads one CSV written
by the experiment runners, so figures can be regenerated from a result
directory alone and a rerun overwrites them byte-for-byte (fixed svg
hashsalt, no embedded date).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

plt.rcParams["svg.hashsalt"] = "rcmlab"

__all__ = ["render_all", "PLOTTERS"]

_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fnum(row: dict, key: str) -> float:
    v = row.get(key, "")
    return float(v) if v not in ("", "nan", None) else math.nan


def _save(fig, out: Path) -> None:
    fig.tight_layout()
    fig.savefig(out, **_SAVE)
    plt.close(fig)


def plot_metric_tails(src: Path, out: Path) -> None:
    rows = _read(src)
    n = [_fnum(r, "n") for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, label in (("u_exceed", "speed u_x"), ("v_exceed", "detour v_x")):
        y = [_fnum(r, key) for r in rows]
        ax.semilogy(n, [max(v, 1e-12) for v in y], "o-", label=label)
    ax.set_xlabel("n")
    ax.set_ylabel("exceedance frequency")
    ax.legend()
    _save(fig, out)


def plot_iso_summary(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for p_val in sorted({r["p"] for r in rows}):
        sub = [r for r in rows if r["p"] == p_val]
        n = [_fnum(r, "n") for r in sub]
        ax.plot(n, [_fnum(r, "min_scaled") for r in sub], "o-",
                label=f"min, p={p_val}")
        ax.plot(n, [_fnum(r, "median_scaled") for r in sub], "s--",
                label=f"median, p={p_val}")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("n")
    ax.set_ylabel("n * Cheeger lower bound")
    ax.legend(fontsize=8)
    _save(fig, out)


def plot_poincare(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    n = [_fnum(r, "n") for r in rows]
    ax.plot(n, [_fnum(r, "scaled") for r in rows], "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("C_w(n) / n^2")
    _save(fig, out)


def plot_fpp_ratios(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for ratio in sorted({r["ratio"] for r in rows}, key=float):
        sub = [r for r in rows if r["ratio"] == ratio]
        n = [_fnum(r, "n") for r in sub]
        freq = [_fnum(r, "violation_rate") for r in sub]
        ax.plot(n, freq, "o-", label=f"time/hops = {ratio}")
    ax.set_xlabel("n")
    ax.set_ylabel("violation frequency")
    ax.legend()
    _save(fig, out)


def plot_kernel_stability(src: Path, out: Path) -> None:
    rows = _read(src)
    t = [_fnum(r, "t") for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.loglog(t, [_fnum(r, "sup_p") for r in rows], "o-")
    ax1.set_xlabel("t")
    ax1.set_ylabel("sup_y P_t(0, y)")
    ax2.semilogx(t, [_fnum(r, "scaled") for r in rows], "o-")
    ax2.set_xlabel("t")
    ax2.set_ylabel("sup_p * t^{d/2}")
    _save(fig, out)


def plot_corrector_sigma(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = [_fnum(x, "radius") for x in rows]
    ax.plot(r, [_fnum(x, "sigma_v_sq") for x in rows], "o-")
    ax.set_xlabel("torus radius")
    ax.set_ylabel("sigma_v^2")
    _save(fig, out)


def plot_sublinearity(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = [_fnum(x, "radius") for x in rows]
    ax.plot(r, [_fnum(x, "max_ratio") for x in rows], "o-", label="max |chi|/n")
    eps_cols = sorted(k for k in rows[0] if k.startswith("density_eps_"))
    for k in eps_cols:
        ax.plot(r, [_fnum(x, k) for x in rows], "s--",
                label=k.replace("density_eps_", "eps="))
    ax.set_xlabel("torus radius")
    ax.set_ylabel("sublinearity diagnostics")
    ax.legend(fontsize=8)
    _save(fig, out)


def plot_clt_percentiles(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    coords = sorted({r["coordinate"] for r in rows})
    for c in coords:
        sub = [r for r in rows if r["coordinate"] == c]
        ax.plot([_fnum(r, "theoretical") for r in sub],
                [_fnum(r, "empirical") for r in sub], ".", label=f"coord {c}")
    lim = ax.get_xlim()
    ax.plot(lim, lim, "k-", lw=0.5)
    ax.set_xlabel("Normal percentiles")
    ax.set_ylabel("empirical percentiles")
    ax.legend()
    _save(fig, out)


def plot_clt_trend(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind in sorted({r["kind"] for r in rows}):
        sub = [r for r in rows if r["kind"] == kind]
        t = [_fnum(r, "t") for r in sub]
        y = [_fnum(r, "var_over_t") for r in sub]
        err = [_fnum(r, "ci_half") for r in sub]
        ax.errorbar(t, y, yerr=err, fmt="o-", label=kind, capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("Var(X_t) / t per coordinate")
    ax.legend()
    _save(fig, out)


def plot_audit_edge_hist(src: Path, out: Path) -> None:
    rows = _read(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    length = [_fnum(r, "length") for r in rows]
    ax.bar(length, [_fnum(r, "count") for r in rows], width=0.8,
           alpha=0.6, label="observed")
    ax.plot(length, [_fnum(r, "expected") for r in rows], "k.-",
            label="Geometric(p)")
    ax.set_yscale("log")
    ax.set_xlabel("edge length")
    ax.set_ylabel("count")
    ax.legend()
    _save(fig, out)


PLOTTERS = {
    "metric_tails.csv": ("metric_tails.svg", plot_metric_tails),
    "iso_summary.csv": ("iso_summary.svg", plot_iso_summary),
    "poincare.csv": ("poincare.svg", plot_poincare),
    "fpp_ratios.csv": ("fpp_ratios.svg", plot_fpp_ratios),
    "kernel_stability.csv": ("kernel_stability.svg", plot_kernel_stability),
    "corrector_sigma.csv": ("corrector_sigma.svg", plot_corrector_sigma),
    "sublinearity.csv": ("sublinearity.svg", plot_sublinearity),
    "clt_percentiles.csv": ("clt_percentiles.svg", plot_clt_percentiles),
    "clt_trend.csv": ("clt_trend.svg", plot_clt_trend),
    "audit_edge_hist.csv": ("audit_edge_hist.svg", plot_audit_edge_hist),
}


def render_all(result_dir) -> list[Path]:
    """Render every known CSV in the directory; returns the SVGs written."""
    result_dir = Path(result_dir)
    if not result_dir.is_dir():
        raise FileNotFoundError(f"result directory {result_dir} does not exist")
    written = []
    for name, (svg_name, fn) in sorted(PLOTTERS.items()):
        src = result_dir / name
        if not src.exists():
            continue
        rows = _read(src)
        if not rows:
            continue
        out = result_dir / svg_name
        fn(src, out)
        written.append(out)
    return written
