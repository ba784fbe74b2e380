"""Exact minimax dynamic programming on a discretised state lattice.

Backward induction computes upper (inf-sup) and lower (sup-inf) value tables

    V(t_k, x) = optimise_a { E[V(t_{k+1}, X_{k+1}) | x, a] + f(t_k, x, a) dt }

with an exhaustive minimax over the discretised action grids at every node.
Transitions are per-coordinate trinomials with integer jump span m and

    p_pm = (s2 dt + (b dt)^2) / (2 h^2) +- b dt / (2 h),   h = m dx,

which match the Euler mean and variance exactly; a coordinate whose diffusion
vanishes for every action falls back to a two-point interpolation split of
the drifted target (exact mean, O(dx^2) variance surplus).  States leaving
the box are clamped to the boundary node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coeffs import PathBatch, ScenarioSpec
from .errors import InvalidArgumentError, StabilityViolationError
from .hamiltonian import ActionTables, minimax_field

__all__ = [
    "Lattice",
    "ResidualReport",
    "ValueTable",
    "backward_lower",
    "backward_upper",
    "build_lattice",
    "minimax_step",
    "solve_tables",
    "table_from_function",
    "value_gap",
    "viscosity_residual",
]


@dataclass
class Lattice:
    times: np.ndarray            # (n_t+1,)
    axes: list                   # per-coordinate node positions
    nodes: np.ndarray            # (N, d) row-major over axes
    shape: tuple                 # (n_x0, ...)
    dx: np.ndarray               # (d,)
    dt: float
    tables: ActionTables         # coefficients per action pair on the nodes
    span: np.ndarray             # (d,) trinomial jump spans (0 = drift-split branch)
    spec_name: str

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_steps(self):
        return len(self.times) - 1

    def node_index(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = 0
        for j, ax in enumerate(self.axes):
            idx = idx * len(ax) + int(np.abs(ax - x[j]).argmin())
        return idx

    # -- transition data ----------------------------------------------------

    def _coord_stencil(self, j):
        """Per-coordinate stencil: ("tri", offsets (3,)) or ("split", bases
        (P, S)), with probabilities (P, S, C)."""
        t = self.tables
        s2 = t.vol2[..., j, j]                    # (P, S)
        b = t.drift[..., j]
        if self.span[j] == 0:
            delta = b * self.dt / self.dx[j]
            base = np.floor(delta).astype(int)
            theta = delta - base
            probs = np.stack([1.0 - theta, theta], axis=-1)
            return ("split", base), probs
        h = self.span[j] * self.dx[j]
        lam = (s2 * self.dt + (b * self.dt) ** 2) / h**2
        mu = b * self.dt / h
        probs = np.stack([(lam - mu) / 2.0, 1.0 - lam, (lam + mu) / 2.0], axis=-1)
        return ("tri", np.array([-self.span[j], 0, self.span[j]])), probs

    def _per_pair_field(self, arr, P):
        """(P, S) -> broadcastable over (P, *shape)."""
        if arr.shape[1] == 1:
            return arr.reshape((P,) + (1,) * self.dim)
        return arr.reshape((P, *self.shape))

    def expected_next(self, values: np.ndarray) -> np.ndarray:
        """E[values at the next node] per (pair, node); values (N,) -> (P, N)."""
        P = self.tables.vol2.shape[0]
        d = self.dim
        cur = np.broadcast_to(values.reshape(self.shape), (P, *self.shape)).copy()
        for j in range(d - 1, -1, -1):
            (kind, off), probs = self._coord_stencil(j)
            nj = self.shape[j]
            axis = 1 + j
            idx_shape = (1,) * axis + (nj,) + (1,) * (d - 1 - j)
            idx = np.arange(nj).reshape(idx_shape)
            acc = np.zeros_like(cur)
            if kind == "split":
                base = self._per_pair_field(off, P)
                for c in range(2):
                    tgt = np.clip(idx + base + c, 0, nj - 1)
                    gathered = np.take_along_axis(
                        cur, np.broadcast_to(tgt, cur.shape), axis=axis)
                    acc += self._per_pair_field(probs[..., c], P) * gathered
            else:
                for c, o in enumerate(off):
                    sl = np.clip(np.arange(nj) + int(o), 0, nj - 1)
                    gathered = np.take(cur, sl, axis=axis)
                    acc += self._per_pair_field(probs[..., c], P) * gathered
            cur = acc
        return cur.reshape(P, self.n_nodes)

    def transition_vector(self, pair_index: int, node_index: int):
        """Explicit probability vector over next-slice node indices for one
        (action pair, node); used by consistency checks."""
        multi = np.unravel_index(node_index, self.shape)
        combos = [((), 1.0)]
        for j in range(self.dim):
            (kind, off), probs = self._coord_stencil(j)
            s_idx = 0 if probs.shape[1] == 1 else node_index
            pr = probs[pair_index, s_idx]
            if kind == "split":
                b = int(off[pair_index, s_idx])
                offsets = [b, b + 1]
            else:
                offsets = [int(o) for o in off]
            new = []
            for prefix, p0 in combos:
                for o, p in zip(offsets, pr):
                    if p <= 1e-15:
                        continue
                    tgt = int(np.clip(multi[j] + o, 0, self.shape[j] - 1))
                    new.append((prefix + (tgt,), p0 * float(p)))
            combos = new
        out = {}
        for tgt, p in combos:
            flat = int(np.ravel_multi_index(tgt, self.shape))
            out[flat] = out.get(flat, 0.0) + p
        idx = np.array(sorted(out))
        return idx, np.array([out[i] for i in idx])


@dataclass
class ValueTable:
    times: np.ndarray
    upper: np.ndarray            # (n_t+1, N)
    lower: np.ndarray
    upper_actions: Optional[np.ndarray] = None  # (n_t, N, 2) action-grid indices
    lower_actions: Optional[np.ndarray] = None


def _default_box(spec: ScenarioSpec):
    b = spec.bounds.get("drift", 1.0)
    s = spec.bounds.get("vol", 1.0)
    half = 3.0 * s * np.sqrt(spec.horizon) + b * spec.horizon
    return (-half * np.ones(spec.state_dim), half * np.ones(spec.state_dim))


def build_lattice(spec: ScenarioSpec, n_t: int, n_x: int, box=None,
                  actions0=None, actions1=None) -> Lattice:
    """Trinomial-per-coordinate lattice for a Markovian scenario with d <= 2.

    Raises StabilityViolationError (naming a feasible n_t when one exists)
    when the time step is too coarse for nonnegative probabilities inside the
    chosen box.
    """
    if not spec.markovian:
        raise InvalidArgumentError(f"{spec.name} is not marked Markovian")
    if spec.state_dim > 2:
        raise InvalidArgumentError("lattice supports d <= 2")
    if n_t < 1 or n_x < 2:
        raise InvalidArgumentError("need n_t >= 1 and n_x >= 2")
    lo, hi = box if box is not None else _default_box(spec)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (spec.state_dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (spec.state_dim,))
    axes = [np.linspace(lo[j], hi[j], n_x) for j in range(spec.state_dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    dx = np.array([ax[1] - ax[0] for ax in axes])
    dt = spec.horizon / n_t
    times = np.linspace(0.0, spec.horizon, n_t + 1)

    tables = ActionTables.build(spec, 0.0, nodes, actions0, actions1)
    off_diag = np.abs(tables.vol2).sum(axis=(-1, -2)) \
        - np.abs(np.diagonal(tables.vol2, axis1=-2, axis2=-1)).sum(axis=-1)
    if off_diag.max(initial=0.0) > 1e-10:
        raise InvalidArgumentError(
            "lattice transitions require diagonal sigma sigma^T (per-coordinate noise)")

    span = np.zeros(spec.state_dim, dtype=int)
    for j in range(spec.state_dim):
        s2 = tables.vol2[..., j, j]
        b = tables.drift[..., j]
        if s2.max(initial=0.0) <= 1e-12 * max(1.0, float(dx[j]) ** 2):
            span[j] = 0  # pure-drift coordinate: interpolation split
            continue
        need = np.sqrt((s2 * dt + (b * dt) ** 2).max())
        m = max(1, int(np.ceil(need / dx[j] - 1e-12)))
        if m > (n_x - 1) // 2:
            h_max = ((n_x - 1) // 2) * dx[j]
            req = int(np.ceil(spec.horizon * float(s2.max()) / (0.99 * h_max**2)))
            raise StabilityViolationError(required_n_t=max(req, n_t + 1))
        margin = s2 + b**2 * dt - np.abs(b) * m * dx[j]
        if margin.min() < -1e-12:
            req = _search_feasible_nt(spec.horizon, s2, b, dx[j], (n_x - 1) // 2, n_t)
            raise StabilityViolationError(required_n_t=req)
        span[j] = m
    return Lattice(times=times, axes=axes, nodes=nodes,
                   shape=tuple(len(ax) for ax in axes), dx=dx, dt=dt,
                   tables=tables, span=span, spec_name=spec.name)


def _search_feasible_nt(T, s2, b, dx, m_cap, n_t):
    for cand in [n_t * 2**k for k in range(1, 22)]:
        dt = T / cand
        need = np.sqrt((s2 * dt + (b * dt) ** 2).max())
        m = max(1, int(np.ceil(need / dx - 1e-12)))
        if m > m_cap:
            continue
        if (s2 + b**2 * dt - np.abs(b) * m * dx).min() >= -1e-12:
            return cand
    return None


def _terminal_values(lattice: Lattice, spec: ScenarioSpec) -> np.ndarray:
    paths = PathBatch(np.array([spec.horizon]), lattice.nodes[:, None, :])
    return np.asarray(spec.terminal_cost(paths), dtype=float)


def minimax_step(lattice: Lattice, next_values: np.ndarray, which: str):
    """One backward recursion step: exhaustive minimax of the expected
    continuation plus the running-cost increment.  Returns (values, actions)
    with actions as (N, 2) grid indices, ties to the smallest index."""
    t = lattice.tables
    N = lattice.n_nodes
    m0, m1 = t.m0, t.m1
    cost = t.cost if t.cost.shape[1] == N else np.broadcast_to(t.cost, (t.cost.shape[0], N))
    q = lattice.expected_next(next_values) + lattice.dt * cost
    qc = q.reshape(m0, m1, N)
    rng_n = np.arange(N)
    if which == "upper":
        row = qc.max(axis=1)
        i_star = row.argmin(axis=0)
        vals = row[i_star, rng_n]
        j_star = qc[i_star, :, rng_n].argmax(axis=1)
    else:
        col = qc.min(axis=0)
        j_star = col.argmax(axis=0)
        vals = col[j_star, rng_n]
        i_star = qc[:, j_star, rng_n].argmin(axis=0)
    return vals, np.stack([i_star, j_star], axis=-1).astype(np.int32)


def _one_side(lattice: Lattice, spec: ScenarioSpec, which: str):
    N = lattice.n_nodes
    n_t = lattice.n_steps
    vals = np.empty((n_t + 1, N))
    vals[n_t] = _terminal_values(lattice, spec)
    actions = np.empty((n_t, N, 2), dtype=np.int32)
    for k in range(n_t - 1, -1, -1):
        vals[k], actions[k] = minimax_step(lattice, vals[k + 1], which)
    return vals, actions


def solve_tables(lattice: Lattice, spec: ScenarioSpec) -> ValueTable:
    """Both value tables by exhaustive backward minimax."""
    up, ua = _one_side(lattice, spec, "upper")
    lo, la = _one_side(lattice, spec, "lower")
    return ValueTable(times=lattice.times, upper=up, lower=lo,
                      upper_actions=ua, lower_actions=la)


def backward_upper(lattice: Lattice, spec: ScenarioSpec) -> ValueTable:
    """inf-sup recursion (the lower table is filled alongside for the
    ordering diagnostics that every caller wants)."""
    return solve_tables(lattice, spec)


def backward_lower(lattice: Lattice, spec: ScenarioSpec) -> ValueTable:
    """sup-inf recursion; see backward_upper."""
    return solve_tables(lattice, spec)


def value_gap(table: ValueTable) -> float:
    """Max over nodes of upper - lower at time 0."""
    return float((table.upper[0] - table.lower[0]).max())


def table_from_function(lattice: Lattice, fn) -> np.ndarray:
    """Tabulate a callable v(t, x (N,d)) -> (N,) on the lattice grid."""
    return np.stack([np.asarray(fn(tk, lattice.nodes)) for tk in lattice.times])


@dataclass
class ResidualReport:
    field: np.ndarray        # (n_t, N), NaN outside the evaluated interior
    max_abs: float
    interior: np.ndarray     # bool mask of trimmed interior nodes


def _derivative_fields(values_slice, lattice):
    """Central first/second/cross derivatives of one time slice; the wrapped
    boundary values are masked out by the caller."""
    shape = lattice.shape
    d = lattice.dim
    v = values_slice.reshape(shape)
    interior = np.ones(shape, dtype=bool)
    for j in range(d):
        idx = [slice(None)] * d
        idx[j] = 0
        interior[tuple(idx)] = False
        idx[j] = -1
        interior[tuple(idx)] = False
    z = np.zeros((*shape, d))
    gamma = np.zeros((*shape, d, d))
    for j in range(d):
        vp = np.roll(v, -1, axis=j)
        vm = np.roll(v, 1, axis=j)
        z[..., j] = (vp - vm) / (2 * lattice.dx[j])
        gamma[..., j, j] = (vp - 2 * v + vm) / lattice.dx[j] ** 2
    if d == 2:
        vpp = np.roll(np.roll(v, -1, axis=0), -1, axis=1)
        vmm = np.roll(np.roll(v, 1, axis=0), 1, axis=1)
        vpm = np.roll(np.roll(v, -1, axis=0), 1, axis=1)
        vmp = np.roll(np.roll(v, 1, axis=0), -1, axis=1)
        cross = (vpp + vmm - vpm - vmp) / (4 * lattice.dx[0] * lattice.dx[1])
        gamma[..., 0, 1] = cross
        gamma[..., 1, 0] = cross
    return z.reshape(-1, d), gamma.reshape(-1, d, d), interior.ravel()


def viscosity_residual(values, lattice: Lattice, spec: ScenarioSpec,
                       which="upper", trim=0.1) -> ResidualReport:
    """Discrete PDE residual -d_t V - H(x, DV, D^2V) of a value array.

    values: (n_t+1, N), e.g. one side of a ValueTable or a tabulated closed
    form.  The summary max is over nodes at least ``trim`` of the box away
    from each face.
    """
    n_t = lattice.n_steps
    N = lattice.n_nodes
    field = np.full((n_t, N), np.nan)
    mask = np.ones(lattice.shape, dtype=bool)
    for j, nj in enumerate(lattice.shape):
        cut = max(1, int(np.floor(trim * nj)))
        keep = np.zeros(lattice.shape, dtype=bool)
        idx = [slice(None)] * lattice.dim
        idx[j] = slice(cut, nj - cut)
        keep[tuple(idx)] = True
        mask &= keep
    mask_flat = mask.ravel()
    for k in range(n_t):
        z, gamma, interior = _derivative_fields(values[k], lattice)
        ham = minimax_field(lattice.tables, z, gamma, which=which)[which]
        res = -(values[k + 1] - values[k]) / lattice.dt - ham
        res[~interior] = np.nan
        field[k] = res
    sub = field[:, mask_flat]
    return ResidualReport(field=field, max_abs=float(np.nanmax(np.abs(sub))),
                          interior=mask_flat)
