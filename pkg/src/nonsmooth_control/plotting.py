"""Figure rendering for CLI outputs.

Every figure is a view of a CSV or grid-function file written next to it;
the files remain the machine-readable contract.  PNGs are saved without
software metadata so identical data gives identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Grid  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "lines.linewidth": 1.5,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_fields(path: str | Path, grid: Grid, fields: dict[str, np.ndarray],
                title: str = "") -> Path:
    """Nodal fields as curves (1D) or one image panel per field (2D)."""
    path = Path(path)
    with plt.rc_context(STYLE):
        if grid.dim == 1:
            fig, ax = plt.subplots()
            x = grid.padded_axes()[0]
            for name, values in fields.items():
                ax.plot(x, grid.padded(values), label=name)
            ax.set_xlabel("x")
            ax.legend()
            ax.set_title(title)
        else:
            fig, axes = plt.subplots(1, len(fields), figsize=(4.0 * len(fields), 3.6),
                                     squeeze=False)
            extent = (grid.low[0], grid.high[0], grid.low[1], grid.high[1])
            for ax, (name, values) in zip(axes[0], fields.items()):
                im = ax.imshow(grid.padded(values).T, origin="lower", extent=extent,
                               aspect="equal")
                ax.set_title(name)
                ax.set_xlabel("x1")
                ax.set_ylabel("x2")
                ax.grid(False)
                fig.colorbar(im, ax=ax, shrink=0.8)
            if title:
                fig.suptitle(title)
        return _save(fig, path)


def plot_series(path: str | Path, x: Sequence[float], series: dict[str, Sequence[float]],
                xlabel: str, ylabel: str, logx: bool = False, logy: bool = False,
                title: str = "", reference: float | None = None,
                markers: bool = True) -> Path:
    """One or more ``y(x)`` series on shared axes, optional horizontal reference."""
    path = Path(path)
    x = np.asarray(x, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, y in series.items():
            y = np.asarray(y, dtype=float)
            if logy:
                y = np.abs(y)
            ax.plot(x, y, marker="o" if markers else None, markersize=3, label=name)
        if reference is not None:
            ax.axhline(abs(reference) if logy else reference, color="k", linestyle="--",
                       linewidth=1.0, label="reference")
        ax.set_xscale("log" if logx else "linear")
        ax.set_yscale("log" if logy else "linear")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_history(path: str | Path, stages: np.ndarray, residuals: np.ndarray) -> Path:
    """Proximal-gradient residual against the cumulative iteration count."""
    path = Path(path)
    residuals = np.asarray(residuals, dtype=float)
    k = np.arange(residuals.size)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ok = np.isfinite(residuals) & (residuals > 0)
        ax.semilogy(k[ok], residuals[ok], linewidth=1.0)
        starts = np.flatnonzero(np.diff(np.asarray(stages)) != 0) + 1
        for s in starts:
            ax.axvline(s, color="0.7", linewidth=0.5)
        ax.set_xlabel("accepted step (all stages)")
        ax.set_ylabel("prox-gradient residual")
        return _save(fig, path)
