"""Static line charts for reports (PNG by default, self-contained SVG on request)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "srtlab",
    "svg.fonttype": "path",
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _save(fig, path: Path, svg: bool) -> Path:
    path = path.with_suffix(".svg" if svg else ".png")
    meta = {"Date": None} if svg else {"Software": None}
    fig.tight_layout()
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def plot_ratios(x, local, integrated, path: Path, svg: bool = False, title: str = "") -> Path:
    fig, ax = plt.subplots()
    ax.semilogx(x, local, lw=0.8, label="U(x+I) / (C h A(x)/x)")
    ax.semilogx(x, integrated, lw=1.2, label="U([0,x]) / ((C/alpha) A(x))")
    ax.axhline(1.0, color="k", lw=0.6, ls="--")
    ax.set_xlabel("x")
    ax.set_ylabel("ratio")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path, svg)


def plot_grid(grid, path: Path, svg: bool = False) -> Path:
    fig, ax = plt.subplots()
    for i, eta in enumerate(grid.eta_list):
        ax.semilogx(grid.x_list, grid.Q[i], marker="o", ms=3, lw=1, label=f"eta = {eta:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("Q(eta, x)")
    ax.set_title(f"{grid.criterion}: {grid.trend}")
    ax.legend()
    return _save(fig, path, svg)


def plot_series(x, series: dict, path: Path, svg: bool = False, title: str = "", ylabel: str = "") -> Path:
    fig, ax = plt.subplots()
    for name, vals in series.items():
        v = np.asarray(vals, dtype=float)
        ok = v > 0
        ax.loglog(np.asarray(x)[ok], v[ok], marker="o", ms=3, lw=1, label=str(name))
    ax.set_xlabel("x")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path, svg)
