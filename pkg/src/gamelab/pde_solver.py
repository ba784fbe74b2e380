"""Monotone explicit finite differences for the Markovian minimax PDEs.

Backward time stepping

    v(t_k) = v(t_{k+1}) + dt * H_grid(x, Dv(t_{k+1}), D^2 v(t_{k+1}))

where H_grid runs the exhaustive inf-sup (or sup-inf) over the action grids
per node.  Spatial operators are kept monotone throughout:

* second derivatives: central per coordinate; the cross term uses the
  diagonal directional second difference matching the sign of the
  off-diagonal diffusion (nonnegative neighbour weights whenever the
  diagonal dominates, which degenerate scenarios meet with equality);
* first derivatives: central where the acting drift passes the monotonicity
  inequality |b_j| <= (a_jj - sum |a_jk|)/dx_j, sign-matched one-sided
  otherwise;
* boundary: terminal-profile extrapolation v[bd] = g(x_bd) +
  (v[nearest interior] - g(x_nearest)), exact for solutions of the form
  g(x) + c (T - t) and nondecreasing in the updated interior value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coeffs import ControlLaw, PathBatch, ScenarioSpec
from .errors import (InvalidArgumentError, NoSaddleFieldError,
                     StabilityViolationError)
from .hamiltonian import ActionTables, minimax_field, saddle_scan

__all__ = [
    "FdGrid",
    "PdeSolution",
    "SaddleField",
    "build_grid",
    "closed_form_error",
    "saddle_field",
    "saddle_field_laws",
    "solve_isaacs",
    "step_once",
    "suggest_n_t",
]

_NODE_CHUNK = 8192


@dataclass
class FdGrid:
    """Uniform space-time grid for the explicit scheme."""

    axes: list
    nodes: np.ndarray       # (N, d)
    shape: tuple
    dx: np.ndarray
    n_t: int
    times: np.ndarray

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def dt(self):
        return self.times[1] - self.times[0]

    def node_index(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = 0
        for j, ax in enumerate(self.axes):
            idx = idx * len(ax) + int(np.abs(ax - x[j]).argmin())
        return idx


def _stability_rate(tables: ActionTables, dx) -> float:
    """Max over pairs/nodes of the centre-node drain rate of the scheme."""
    vol2 = tables.vol2
    diag = np.diagonal(vol2, axis1=-2, axis2=-1)
    d = diag.shape[-1]
    if d == 2:
        w_abs = np.abs(vol2[..., 0, 1])
        rate = ((diag[..., 0] - w_abs * dx[0] / dx[1]) / dx[0] ** 2
                + (diag[..., 1] - w_abs * dx[1] / dx[0]) / dx[1] ** 2
                + w_abs / (dx[0] * dx[1]))
    else:
        rate = diag[..., 0] / dx[0] ** 2
    off_abs = np.abs(vol2).sum(axis=-1) - np.abs(diag)
    for j in range(d):
        bj = np.abs(tables.drift[..., j])
        slack = (diag[..., j] - off_abs[..., j]) / dx[j]
        rate = rate + np.where(bj > slack + 1e-14, bj / dx[j], 0.0)
    return float(rate.max())


def suggest_n_t(spec: ScenarioSpec, n_x: int, box, actions0=None,
                actions1=None, safety=1.05) -> int:
    """Smallest stable time-step count for the explicit scheme on this box."""
    grid = build_grid(spec, n_x, box, n_t=1, actions0=actions0,
                      actions1=actions1, validate=False)
    tables = ActionTables.build(spec, 0.0, grid.nodes, actions0, actions1)
    rate = _stability_rate(tables, grid.dx)
    return max(1, int(np.ceil(spec.horizon * rate * safety)))


def build_grid(spec: ScenarioSpec, n_x: int, box=None, n_t=None,
               actions0=None, actions1=None, validate=True) -> FdGrid:
    """Space-time grid; n_t defaults to the smallest stable value."""
    if spec.state_dim > 2:
        raise InvalidArgumentError("finite differences implemented for d <= 2")
    if not spec.markovian:
        raise InvalidArgumentError(f"{spec.name} is not marked Markovian")
    if box is None:
        b = spec.bounds.get("drift", 1.0)
        s = spec.bounds.get("vol", 1.0)
        half = 3.0 * s * np.sqrt(spec.horizon) + b * spec.horizon
        box = (-half * np.ones(spec.state_dim), half * np.ones(spec.state_dim))
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (spec.state_dim,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (spec.state_dim,))
    axes = [np.linspace(lo[j], hi[j], n_x) for j in range(spec.state_dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    dx = np.array([ax[1] - ax[0] for ax in axes])
    if n_t is None:
        tables = ActionTables.build(spec, 0.0, nodes, actions0, actions1)
        rate = _stability_rate(tables, dx)
        n_t = max(1, int(np.ceil(spec.horizon * rate * 1.05)))
        validate = False
    grid = FdGrid(axes=axes, nodes=nodes, shape=tuple(len(a) for a in axes),
                  dx=dx, n_t=int(n_t), times=np.linspace(0.0, spec.horizon, int(n_t) + 1))
    if validate:
        tables = ActionTables.build(spec, 0.0, nodes, actions0, actions1)
        rate = _stability_rate(tables, dx)
        if grid.dt * rate > 1.0 + 1e-12:
            raise StabilityViolationError(
                required_n_t=int(np.ceil(spec.horizon * rate * 1.05)))
    return grid


@dataclass
class PdeSolution:
    which: str
    times: np.ndarray
    values: np.ndarray      # (n_t+1, N)
    grid: FdGrid
    spec_name: str

    def at(self, t_index, x) -> float:
        return float(self.values[t_index, self.grid.node_index(x)])


def _stencil_fields(v_flat, grid: FdGrid):
    """Monotone derivative stencils of one time slice (wrapped edges are
    overwritten by the boundary rule before use)."""
    shape = grid.shape
    d = grid.dim
    v = v_flat.reshape(shape)
    z_c = np.empty((*shape, d))
    z_p = np.empty((*shape, d))
    z_m = np.empty((*shape, d))
    diag = np.empty((*shape, d))
    for j in range(d):
        vp = np.roll(v, -1, axis=j)
        vm = np.roll(v, 1, axis=j)
        z_p[..., j] = (vp - v) / grid.dx[j]
        z_m[..., j] = (v - vm) / grid.dx[j]
        z_c[..., j] = (vp - vm) / (2 * grid.dx[j])
        diag[..., j] = (vp - 2 * v + vm) / grid.dx[j] ** 2
    fields = {"diag": diag.reshape(-1, d)}
    if d == 2:
        vpp = np.roll(np.roll(v, -1, axis=0), -1, axis=1)
        vmm = np.roll(np.roll(v, 1, axis=0), 1, axis=1)
        vpm = np.roll(np.roll(v, -1, axis=0), 1, axis=1)
        vmp = np.roll(np.roll(v, 1, axis=0), -1, axis=1)
        scale = grid.dx[0] * grid.dx[1]
        fields["main"] = ((vpp - 2 * v + vmm) / scale).ravel()
        fields["anti"] = ((vpm - 2 * v + vmp) / scale).ravel()
    N = grid.n_nodes
    return z_c.reshape(N, d), z_p.reshape(N, d), z_m.reshape(N, d), fields


def _boundary_maps(grid: FdGrid):
    """Boundary node indices and their nearest interior node indices."""
    shape = grid.shape
    mesh = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
    idx = np.stack([m.ravel() for m in mesh], axis=-1)
    on_bd = np.zeros(grid.n_nodes, dtype=bool)
    for j, nj in enumerate(shape):
        on_bd |= (idx[:, j] == 0) | (idx[:, j] == nj - 1)
    clipped = np.stack([np.clip(idx[:, j], 1, shape[j] - 2) for j in range(grid.dim)],
                       axis=-1)
    nearest = np.ravel_multi_index(tuple(clipped.T), shape)
    return np.flatnonzero(on_bd), nearest[on_bd]


def _terminal_values(spec, grid):
    paths = PathBatch(np.array([spec.horizon]), grid.nodes[:, None, :])
    return np.asarray(spec.terminal_cost(paths), dtype=float)


def step_once(tables: ActionTables, grid: FdGrid, v: np.ndarray, which: str,
              terminal: np.ndarray, boundary_maps=None) -> np.ndarray:
    """One explicit backward step including the boundary extrapolation rule."""
    bd_idx, bd_near = boundary_maps if boundary_maps is not None else _boundary_maps(grid)
    z_c, z_p, z_m, gfields = _stencil_fields(v, grid)
    ham = minimax_field(tables, z_c, None, which=which,
                        z_plus=z_p, z_minus=z_m, dx=grid.dx,
                        gamma_stencils=gfields, node_chunk=_NODE_CHUNK)[which]
    out = v + grid.dt * ham
    out[bd_idx] = terminal[bd_idx] + (out[bd_near] - terminal[bd_near])
    return out


def solve_isaacs(spec: ScenarioSpec, grid: FdGrid, which: str,
                 actions0=None, actions1=None) -> PdeSolution:
    """Backward explicit sweep of the upper or lower minimax PDE."""
    if which not in ("upper", "lower"):
        raise InvalidArgumentError("which must be 'upper' or 'lower'")
    tables = ActionTables.build(spec, 0.0, grid.nodes, actions0, actions1)
    rate = _stability_rate(tables, grid.dx)
    if grid.dt * rate > 1.0 + 1e-12:
        raise StabilityViolationError(
            required_n_t=int(np.ceil(spec.horizon * rate * 1.05)))

    g = _terminal_values(spec, grid)
    bd_maps = _boundary_maps(grid)
    n_t = grid.n_t
    values = np.empty((n_t + 1, grid.n_nodes))
    values[n_t] = g
    v = g.copy()
    for k in range(n_t - 1, -1, -1):
        v = step_once(tables, grid, v, which, g, bd_maps)
        if not np.all(np.isfinite(v)):
            raise StabilityViolationError(required_n_t=None,
                                          msg=f"non-finite values at step {k}")
        values[k] = v
    return PdeSolution(which=which, times=grid.times, values=values, grid=grid,
                       spec_name=spec.name)


def closed_form_error(sol: PdeSolution, formula, trim=0.1):
    """(max_abs, l2) error of the solution against v(t, x) over the interior
    trimmed by ``trim`` per side, all time slices."""
    grid = sol.grid
    mask = np.ones(grid.shape, dtype=bool)
    for j, nj in enumerate(grid.shape):
        cut = max(1, int(np.floor(trim * nj)))
        keep = np.zeros(grid.shape, dtype=bool)
        sel = [slice(None)] * grid.dim
        sel[j] = slice(cut, nj - cut)
        keep[tuple(sel)] = True
        mask &= keep
    mask = mask.ravel()
    errs = []
    for k, t in enumerate(sol.times):
        exact = np.asarray(formula(t, grid.nodes))
        errs.append((sol.values[k] - exact)[mask])
    errs = np.stack(errs)
    return float(np.abs(errs).max()), float(np.sqrt((errs**2).mean()))


@dataclass
class SaddleField:
    """Per-node Hamiltonian saddle candidates at one time slice."""

    t_index: int
    nodes: np.ndarray
    actions0: np.ndarray     # (N, d0)
    actions1: np.ndarray     # (N, d1)
    violation: np.ndarray    # (N,)
    gap: np.ndarray          # (N,)
    tie0: np.ndarray         # (N,) count of optimal grid actions, player 0
    tie1: np.ndarray


def _edge_copy_inward(arr, axis):
    """Overwrite face values along an axis with the adjacent inner values."""
    first = [slice(None)] * arr.ndim
    second = [slice(None)] * arr.ndim
    first[axis], second[axis] = 0, 1
    arr[tuple(first)] = arr[tuple(second)]
    first[axis], second[axis] = -1, -2
    arr[tuple(first)] = arr[tuple(second)]


def _central_fields(values_slice, grid):
    """Central derivative fields; edges use second-order one-sided gradients
    and inward-copied curvature (exact on quadratic profiles)."""
    shape = grid.shape
    d = grid.dim
    v = values_slice.reshape(shape)
    z = np.zeros((*shape, d))
    gamma = np.zeros((*shape, d, d))
    for j in range(d):
        z[..., j] = np.gradient(v, grid.dx[j], axis=j, edge_order=2)
        vp = np.roll(v, -1, axis=j)
        vm = np.roll(v, 1, axis=j)
        second = (vp - 2 * v + vm) / grid.dx[j] ** 2
        _edge_copy_inward(second, j)
        gamma[..., j, j] = second
    if d == 2:
        vpp = np.roll(np.roll(v, -1, axis=0), -1, axis=1)
        vmm = np.roll(np.roll(v, 1, axis=0), 1, axis=1)
        vpm = np.roll(np.roll(v, -1, axis=0), 1, axis=1)
        vmp = np.roll(np.roll(v, 1, axis=0), -1, axis=1)
        cross = (vpp + vmm - vpm - vmp) / (4 * grid.dx[0] * grid.dx[1])
        _edge_copy_inward(cross, 0)
        _edge_copy_inward(cross, 1)
        gamma[..., 0, 1] = cross
        gamma[..., 1, 0] = cross
    N = grid.n_nodes
    return z.reshape(N, d), gamma.reshape(N, d, d)


def saddle_field(spec: ScenarioSpec, sol_upper: PdeSolution,
                 sol_lower: PdeSolution, t_index=0, tol=1e-2,
                 actions0=None, actions1=None, tie_tol=1e-9) -> SaddleField:
    """Per-node saddle actions extracted from the solved value surface.

    Requires upper and lower solutions to agree within tol at the slice
    (numerical Isaacs check); ties are reported per node, not resolved away.
    """
    gap = np.abs(sol_upper.values[t_index] - sol_lower.values[t_index]).max()
    if gap > tol:
        raise NoSaddleFieldError(
            f"upper/lower disagree by {gap:.3g} (> {tol:.3g}) at slice {t_index}")
    grid = sol_upper.grid
    avg = 0.5 * (sol_upper.values[t_index] + sol_lower.values[t_index])
    z, gamma = _central_fields(avg, grid)
    tables = ActionTables.build(spec, float(sol_upper.times[t_index]),
                                grid.nodes, actions0, actions1)
    scan = saddle_scan(tables, z, gamma, tol=tie_tol, node_chunk=_NODE_CHUNK)
    return SaddleField(
        t_index=t_index, nodes=grid.nodes,
        actions0=tables.actions0[scan["i0"]],
        actions1=tables.actions1[scan["i1"]],
        violation=scan["violation"], gap=scan["gap"],
        tie0=scan["tie0"], tie1=scan["tie1"])


def saddle_field_laws(spec: ScenarioSpec, sol_upper: PdeSolution,
                      sol_lower: PdeSolution, tol=1e-2) -> tuple:
    """Feedback laws looking up the extracted saddle field at the nearest
    (time slice, node); fields are computed lazily per requested slice."""
    grid = sol_upper.grid
    cache = {}

    def field_at(t):
        k = int(np.abs(sol_upper.times - t).argmin())
        if k not in cache:
            cache[k] = saddle_field(spec, sol_upper, sol_lower, t_index=k, tol=tol)
        return cache[k]

    axes = grid.axes

    def nearest_nodes(x):
        idx = 0
        for j, ax in enumerate(axes):
            pos = np.clip(np.round((x[:, j] - ax[0]) / (ax[1] - ax[0])).astype(int),
                          0, len(ax) - 1)
            idx = idx * len(ax) + pos
        return idx

    def eval_player(player):
        def evaluate(step, paths):
            fld = field_at(paths.grid[step])
            nodes = nearest_nodes(paths.states[:, step, :])
            return (fld.actions0 if player == 0 else fld.actions1)[nodes]
        return evaluate

    return (ControlLaw(eval_player(0), "pde-saddle-field p0", spec.action_sets[0]),
            ControlLaw(eval_player(1), "pde-saddle-field p1", spec.action_sets[1]))
