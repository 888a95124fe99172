"""Figure rendering for command artifacts.

Everything draws through the Agg backend into PNG files next to the
delimited output, with pinned dpi and stripped metadata so repeated runs
emit identical bytes.  Grids are drawn in chart coordinates; 1D fields
become strips so they stay legible.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import InputError
from .ifs import BoxSet, GridMeasure, _chart_bounds

__all__ = [
    "save_field_figure",
    "save_tracks_figure",
    "save_bars_figure",
]

_SAVE = dict(dpi=150, metadata={"Software": None})


def _field_extent(manifold):
    lo, hi = _chart_bounds(manifold)
    if manifold.dim == 1:
        return [lo[0], hi[0], 0.0, 1.0]
    return [lo[0], hi[0], lo[1], hi[1]]


def save_field_figure(obj, path: str, title: str = "") -> None:
    """Raster view of a box set or grid measure, 1D as a strip."""
    if isinstance(obj, BoxSet):
        field = obj.mask.astype(float)
        m = obj.manifold
    elif isinstance(obj, GridMeasure):
        field = obj.weights
        m = obj.manifold
    else:
        raise InputError("field figures need a box set or a grid measure")
    if field.ndim == 1:
        field = np.tile(field, (max(1, field.shape[0] // 8), 1))
    elif field.ndim != 2:
        raise InputError("field figures need a 1D or 2D grid")
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    ax.imshow(field.T, origin="lower", extent=_field_extent(m),
              aspect="auto", cmap="viridis", interpolation="nearest")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_tracks_figure(tracks: dict, path: str, title: str = "",
                       xlabel: str = "step") -> None:
    """Line plot of named 1D tracks over a common index."""
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    for name, values in tracks.items():
        values = np.asarray(values, dtype=float)
        ax.plot(np.arange(len(values)), values, label=name, linewidth=1.0)
    ax.set_xlabel(xlabel)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_bars_figure(labels, values, path: str, title: str = "",
                     hline: float | None = None) -> None:
    """Bar chart with an optional reference line, labels slanted."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(values) + 2.0), 3.6))
    ax.bar(np.arange(len(values)), values, color="#4878a8")
    if hline is not None:
        ax.axhline(hline, color="#b04030", linewidth=1.0, linestyle="--")
    ax.set_xticks(np.arange(len(values)))
    ax.set_xticklabels([str(x) for x in labels], rotation=45, ha="right",
                       fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
