"""Figure rendering from game-lab CSV outputs.

Figures never recompute numerics: they display the columns of the input
files as-is.  Rendering is deterministic (fixed style, no timestamps), so
reruns on identical inputs produce byte-identical images.

Input schemas (columns, as written by game-lab):

* value table   -- time, x1[, x2], upper, lower
* z diagnostics -- step, time, z_rms_error
* saddle field  -- x1, x2, a0_1, a1_1[, tie0, tie1]
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURE_KINDS = ("surface", "heatmap", "convergence", "quiver")

_STYLE = {
    "figure.figsize": (7.0, 5.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotkit",
}


class SchemaError(ValueError):
    """An input file does not match the documented column schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, labels, output path."""

    kind: str
    inputs: Sequence[str]
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    labels: Sequence[str] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")
        for path in self.inputs:
            if not os.path.exists(path):
                raise SchemaError(f"input file not found: {path}")


def read_table(path, required, optional=()):
    """CSV columns as float arrays; missing required columns raise
    SchemaError naming the column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r}")
    keep = [c for c in header if c in set(required) | set(optional)]
    idx = {c: header.index(c) for c in keep}
    data = {}
    for c in keep:
        try:
            data[c] = np.array([float(r[idx[c]]) for r in rows])
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric value in column {c!r}: {exc}")
    return data


def _grid_axes(x):
    vals = np.unique(x)
    return vals


def _finish(fig, spec):
    os.makedirs(os.path.dirname(spec.output) or ".", exist_ok=True)
    meta = {"Date": None} if spec.output.endswith(".svg") else {}
    fig.savefig(spec.output, metadata=meta)
    plt.close(fig)
    return spec.output


def _render_surface(spec):
    data = read_table(spec.inputs[0], required=("time", "x1", "upper"),
                      optional=("x2", "lower"))
    fig = plt.figure()
    ax = fig.add_subplot(projection="3d")
    if "x2" in data:
        # first time slice over the (x1, x2) plane
        t0 = data["time"].min()
        sel = data["time"] == t0
        x1, x2, v = data["x1"][sel], data["x2"][sel], data["upper"][sel]
        ax1 = _grid_axes(x1)
        ax2 = _grid_axes(x2)
        grid = v.reshape(len(ax1), len(ax2))
        m1, m2 = np.meshgrid(ax1, ax2, indexing="ij")
        ax.plot_surface(m1, m2, grid, cmap="viridis", linewidth=0)
        ax.set_xlabel(spec.xlabel or "x1")
        ax.set_ylabel(spec.ylabel or "x2")
        ax.set_zlabel("value")
        ax.set_title(spec.title or f"upper value at t={t0:g}")
    else:
        times = _grid_axes(data["time"])
        xs = _grid_axes(data["x1"])
        grid = np.full((len(times), len(xs)), np.nan)
        ti = np.searchsorted(times, data["time"])
        xi = np.searchsorted(xs, data["x1"])
        grid[ti, xi] = data["upper"]
        mt, mx = np.meshgrid(times, xs, indexing="ij")
        ax.plot_surface(mt, mx, grid, cmap="viridis", linewidth=0)
        ax.set_xlabel(spec.xlabel or "t")
        ax.set_ylabel(spec.ylabel or "x")
        ax.set_zlabel("value")
        ax.set_title(spec.title or "upper value surface")
    return fig


def _render_heatmap(spec):
    data = read_table(spec.inputs[0], required=("time", "x1", "upper", "lower"),
                      optional=("x2",))
    gap = data["upper"] - data["lower"]
    fig, ax = plt.subplots()
    if "x2" in data:
        t0 = data["time"].min()
        sel = data["time"] == t0
        ax1 = _grid_axes(data["x1"][sel])
        ax2 = _grid_axes(data["x2"][sel])
        grid = gap[sel].reshape(len(ax1), len(ax2))
        pc = ax.pcolormesh(ax1, ax2, grid.T, cmap="magma", shading="nearest")
        ax.set_xlabel(spec.xlabel or "x1")
        ax.set_ylabel(spec.ylabel or "x2")
        ax.set_title(spec.title or f"upper - lower at t={t0:g}")
    else:
        times = _grid_axes(data["time"])
        xs = _grid_axes(data["x1"])
        grid = np.zeros((len(times), len(xs)))
        ti = np.searchsorted(times, data["time"])
        xi = np.searchsorted(xs, data["x1"])
        grid[ti, xi] = gap
        pc = ax.pcolormesh(xs, times, grid, cmap="magma", shading="nearest")
        ax.set_xlabel(spec.xlabel or "x")
        ax.set_ylabel(spec.ylabel or "t")
        ax.set_title(spec.title or "upper - lower gap")
    fig.colorbar(pc, ax=ax, label="gap")
    return fig


def _render_convergence(spec):
    fig, ax = plt.subplots()
    any_points = False
    for i, path in enumerate(spec.inputs):
        data = read_table(path, required=("step", "time", "z_rms_error"))
        label = spec.labels[i] if i < len(spec.labels) else os.path.basename(path)
        if data["step"].size:
            any_points = True
            ax.semilogy(data["time"], np.maximum(data["z_rms_error"], 1e-300),
                        marker="o", markersize=3, label=label)
    ax.set_xlabel(spec.xlabel or "t")
    ax.set_ylabel(spec.ylabel or "z RMS error")
    ax.set_title(spec.title or "backward-solver convergence")
    if any_points:
        ax.legend(loc="best")
    return fig


def _render_quiver(spec):
    data = read_table(spec.inputs[0], required=("x1", "x2", "a0_1", "a1_1"),
                      optional=("tie0", "tie1"))
    fig, ax = plt.subplots()
    ties = None
    if "tie0" in data and "tie1" in data:
        ties = np.maximum(data["tie0"], data["tie1"])
    q = ax.quiver(data["x1"], data["x2"], data["a0_1"], data["a1_1"],
                  ties if ties is not None else None,
                  cmap="coolwarm", angles="xy", scale_units="xy", scale=6.0,
                  width=0.003)
    if ties is not None:
        fig.colorbar(q, ax=ax, label="tie count")
    ax.set_xlabel(spec.xlabel or "x1")
    ax.set_ylabel(spec.ylabel or "x2")
    ax.set_title(spec.title or "saddle action field")
    ax.set_aspect("equal")
    return fig


_RENDERERS = {
    "surface": _render_surface,
    "heatmap": _render_heatmap,
    "convergence": _render_convergence,
    "quiver": _render_quiver,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    with plt.rc_context(_STYLE):
        fig = _RENDERERS[spec.kind](spec)
        return _finish(fig, spec)
