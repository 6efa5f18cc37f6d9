"""Report figures (matplotlib, Agg backend): convergence curves, u-v coverage, thumbnails."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import fileio  # noqa: E402
from .metrics import log_transform  # noqa: E402

COLORS = {"fb": "tab:green", "fista": "tab:orange", "iml-fista": "tab:blue"}
LABELS = {"fb": "FB", "fista": "FISTA", "iml-fista": "IML-FISTA"}


def plot_traces(traces: dict, out_dir, f_star=None):
    """Objective gap (or objective) and SNR against cost units and wall time."""
    out_dir = Path(out_dir)
    paths = []
    for xcol, xlabel in (("cost_units", "cost units (fine operator applies)"), ("wall_s", "wall time [s]")):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 3.8))
        for algo, tr in traces.items():
            x = tr.column(xcol)
            obj = tr.column("objective")
            kw = dict(color=COLORS.get(algo), label=LABELS.get(algo, algo))
            if f_star is not None:
                gap = np.maximum(obj - f_star, np.finfo(float).tiny)
                ax0.semilogy(x, gap / max(obj[0] - f_star, np.finfo(float).tiny), **kw)
            else:
                ax0.plot(x, obj, **kw)
            ax1.plot(x, tr.column("snr_db"), **kw)
        ax0.set_ylabel("(F - F*) / (F0 - F*)" if f_star is not None else "objective")
        ax1.set_ylabel("SNR [dB]")
        for ax in (ax0, ax1):
            ax.set_xlabel(xlabel)
            ax.grid(alpha=0.3)
        ax0.legend()
        fig.tight_layout()
        path = out_dir / f"convergence_{xcol.split('_')[0]}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_coverage(coverage, hierarchy, path, max_points=200_000):
    """u-v samples: fine level in blue, the first coarse level in red."""
    fig, ax = plt.subplots(figsize=(5, 5))
    uv = coverage.uv
    stride = max(1, uv.shape[0] // max_points)
    ax.scatter(uv[::stride, 0], uv[::stride, 1], s=0.2, c="tab:blue", label="fine", rasterized=True)
    if hierarchy is not None and hierarchy.depth > 1:
        idx = hierarchy.levels[1].fine_indices[::stride]
        ax.scatter(uv[idx, 0], uv[idx, 1], s=0.2, c="tab:red", label="coarse", rasterized=True)
    ax.set_xlim(-np.pi, np.pi)
    ax.set_ylim(-np.pi, np.pi)
    ax.set_aspect("equal")
    ax.set_xlabel("u [rad/pixel]")
    ax.set_ylabel("v [rad/pixel]")
    ax.legend(markerscale=20, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_snapshots(out_dir, algorithms, path):
    """Grid of log-scaled snapshots: one row per algorithm, one column per checkpoint."""
    out_dir = Path(out_dir)
    grid = {a: sorted(out_dir.glob(f"snapshot_{a}_cost*.img"), key=_checkpoint) for a in algorithms}
    ncols = max((len(v) for v in grid.values()), default=0)
    if ncols == 0:
        return None
    fig, axes = plt.subplots(len(algorithms), ncols, figsize=(2.2 * ncols, 2.2 * len(algorithms)), squeeze=False)
    for i, algo in enumerate(algorithms):
        for j in range(ncols):
            ax = axes[i, j]
            ax.set_xticks([])
            ax.set_yticks([])
            if j < len(grid[algo]):
                f = grid[algo][j]
                ax.imshow(log_transform(np.clip(fileio.load_image(f), 0, None)), cmap="afmhot", vmin=0, vmax=1)
                ax.set_title(f"{_checkpoint(f):g} units", fontsize=8)
            if j == 0:
                ax.set_ylabel(LABELS.get(algo, algo))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def _checkpoint(path: Path) -> float:
    return float(path.stem.rsplit("_cost", 1)[1].replace("p", "."))
