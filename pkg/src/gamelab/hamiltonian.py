"""Minimax Hamiltonians by exhaustive search over discretised action sets.

The pointwise picture: for an action pair a = (a0, a1),

    h = 1/2 Tr[(sigma sigma^T)(a) gamma] + b(a) . z + f(a)

(with f evaluated at (y, z sigma) for nonlinear drivers).  The upper value
optimises inf over a0 of sup over a1, the lower value the reverse order; all
optimisations are exhaustive over the grids, ties broken by the smallest
row-major pair index.

``ActionTables``/``minimax_field`` provide the same minimax vectorised over
many states at once; the PDE and lattice modules feed finite-difference
derivative fields through them so every solver shares one Hamiltonian
implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import PathBatch, SamplePath, ScenarioSpec
from .errors import ConstraintEmptyError, InvalidArgumentError

__all__ = [
    "ActionTables",
    "HamiltonianQuery",
    "SaddleReport",
    "constrained_generator",
    "h",
    "h_matrix",
    "isaacs_gap",
    "lower_H",
    "minimax_field",
    "saddle_point",
    "saddle_scan",
    "upper_H",
]


@dataclass(frozen=True)
class HamiltonianQuery:
    """Evaluation point: time, path prefix, gradient z, Hessian gamma, value y."""

    t: float
    path: object  # SamplePath or single-path PathBatch
    z: np.ndarray
    gamma: np.ndarray
    y: float = 0.0

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if gamma.shape != (z.size, z.size):
            raise InvalidArgumentError("gamma must be (d, d) matching z")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(gamma))):
            raise InvalidArgumentError("query entries must be finite")
        if np.max(np.abs(gamma - gamma.T), initial=0.0) > 1e-12:
            raise InvalidArgumentError("gamma must be symmetric")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "gamma", gamma)

    def batch(self) -> PathBatch:
        if isinstance(self.path, SamplePath):
            return self.path.as_batch()
        return self.path


@dataclass(frozen=True)
class SaddleReport:
    value: float
    action: tuple
    max_violation: float
    is_saddle: bool
    gap: float


def _tile_batch(paths: PathBatch, m: int) -> PathBatch:
    states = np.broadcast_to(paths.states, (m, *paths.states.shape[1:]))
    return PathBatch(paths.grid, states)


def _pair_actions(actions0, actions1):
    """Row-major pairing: pair p = i0 * m1 + i1."""
    m0, m1 = len(actions0), len(actions1)
    i0 = np.repeat(np.arange(m0), m1)
    i1 = np.tile(np.arange(m1), m0)
    return actions0[i0], actions1[i1]


def _integrand(spec, q, batch, a0, a1):
    sig = spec.vol(q.t, batch, a0, a1)
    b = spec.drift(q.t, batch, a0, a1)
    sig2 = np.einsum("nij,nkj->nik", sig, sig)
    zsig = np.einsum("j,njk->nk", q.z, sig)
    f = spec.running_cost(q.t, batch, np.full(batch.n, q.y), zsig, a0, a1)
    return 0.5 * np.einsum("nik,ik->n", sig2, q.gamma) + b @ q.z + f


def h(spec: ScenarioSpec, q: HamiltonianQuery, a0, a1) -> float:
    """Pointwise Hamiltonian integrand at one action pair."""
    a0 = np.atleast_2d(np.asarray(a0, dtype=float))
    a1 = np.atleast_2d(np.asarray(a1, dtype=float))
    return float(_integrand(spec, q, q.batch(), a0, a1)[0])


def h_matrix(spec, q, actions0=None, actions1=None) -> np.ndarray:
    """Hamiltonian integrand on the full action grid, shape (m0, m1)."""
    if actions0 is None:
        actions0 = spec.action_grid(0)
    if actions1 is None:
        actions1 = spec.action_grid(1)
    m0, m1 = len(actions0), len(actions1)
    if m0 == 0 or m1 == 0:
        raise InvalidArgumentError("empty action discretisation")
    A0, A1 = _pair_actions(actions0, actions1)
    vals = _integrand(spec, q, _tile_batch(q.batch(), m0 * m1), A0, A1)
    return vals.reshape(m0, m1)


def upper_H(spec, q, actions0=None, actions1=None) -> float:
    """inf over a0 of sup over a1 on the grid."""
    return float(h_matrix(spec, q, actions0, actions1).max(axis=1).min())


def lower_H(spec, q, actions0=None, actions1=None) -> float:
    """sup over a1 of inf over a0 on the grid."""
    return float(h_matrix(spec, q, actions0, actions1).min(axis=0).max())


def isaacs_gap(spec, q, actions0=None, actions1=None) -> float:
    mat = h_matrix(spec, q, actions0, actions1)
    return float(mat.max(axis=1).min() - mat.min(axis=0).max())


def saddle_point(spec, q, actions0=None, actions1=None, tol=1e-9) -> SaddleReport:
    """Grid action pair minimising the worst violation of the two saddle
    inequalities; the first row-major pair wins ties.

    Absence of a saddle is a valid report (is_saddle False, gap recorded).
    """
    if actions0 is None:
        actions0 = spec.action_grid(0)
    if actions1 is None:
        actions1 = spec.action_grid(1)
    mat = h_matrix(spec, q, actions0, actions1)
    row_max = mat.max(axis=1, keepdims=True)
    col_min = mat.min(axis=0, keepdims=True)
    viol = np.maximum(row_max - mat, mat - col_min)
    flat = int(np.argmin(viol))
    i, j = divmod(flat, mat.shape[1])
    gap = float(mat.max(axis=1).min() - mat.min(axis=0).max())
    max_violation = float(viol[i, j])
    return SaddleReport(
        value=float(mat[i, j]),
        action=(np.asarray(actions0)[i].copy(), np.asarray(actions1)[j].copy()),
        max_violation=max_violation,
        is_saddle=bool(max_violation <= tol and gap <= tol),
        gap=gap,
    )


def constrained_generator(spec, q, player: int, action, sigma_target,
                          actions=None) -> float:
    """Drift-plus-cost generator optimised over the opponent's actions that
    realise sigma sigma^T = sigma_target (Frobenius tolerance 1e-8 (1+|target|)).

    player: index of the player whose action is FIXED.  Returns the sup over
    the other player's constrained set when player 0 is fixed, the inf when
    player 1 is fixed.  Empty constrained set raises ConstraintEmptyError.
    """
    if player not in (0, 1):
        raise InvalidArgumentError("player must be 0 or 1")
    other = 1 - player
    sigma_target = np.atleast_2d(np.asarray(sigma_target, dtype=float))
    if actions is None:
        actions = spec.action_grid(other)
    fixed = np.atleast_1d(np.asarray(action, dtype=float))
    m = len(actions)
    batch = _tile_batch(q.batch(), m)
    fixed_tiled = np.broadcast_to(fixed, (m, fixed.size))
    a0, a1 = (fixed_tiled, actions) if player == 0 else (actions, fixed_tiled)
    sig = spec.vol(q.t, batch, a0, a1)
    sig2 = np.einsum("nij,nkj->nik", sig, sig)
    dist = np.linalg.norm((sig2 - sigma_target).reshape(m, -1), axis=1)
    feasible = dist <= 1e-8 * (1.0 + np.linalg.norm(sigma_target))
    if not feasible.any():
        raise ConstraintEmptyError(
            f"no grid action of player {other} realises the target volatility")
    b = spec.drift(q.t, batch, a0, a1)
    zsig = np.einsum("j,njk->nk", q.z, sig)
    f = spec.running_cost(q.t, batch, np.full(m, q.y), zsig, a0, a1)
    vals = (b @ q.z + f)[feasible]
    return float(vals.max() if player == 0 else vals.min())


# ---------------------------------------------------------------------------
# Vectorised minimax over many states (shared by the PDE and lattice solvers)
# ---------------------------------------------------------------------------


@dataclass
class ActionTables:
    """Coefficient tables per action pair, with the state axis collapsed to 1
    when a coefficient does not read the state.

    Costs are tabulated as f(t, x, a); scenarios whose running cost reads the
    (y, z) arguments need the query-level API instead.
    """

    actions0: np.ndarray  # (m0, d0)
    actions1: np.ndarray  # (m1, d1)
    pairs0: np.ndarray    # (P, d0) row-major pairing
    pairs1: np.ndarray    # (P, d1)
    vol2: np.ndarray      # (P, S, d, d), S in {1, N}
    drift: np.ndarray     # (P, S, d)
    cost: np.ndarray      # (P, S)
    n_states: int

    @property
    def m0(self):
        return len(self.actions0)

    @property
    def m1(self):
        return len(self.actions1)

    @classmethod
    def build(cls, spec: ScenarioSpec, t: float, states: np.ndarray,
              actions0=None, actions1=None) -> "ActionTables":
        """Evaluate coefficients per action pair on the given states (N, d).

        State-independence is detected on a probe subset of states and the
        state axis collapsed accordingly.
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        N, d = states.shape
        if actions0 is None:
            actions0 = spec.action_grid(0)
        if actions1 is None:
            actions1 = spec.action_grid(1)
        actions0 = np.asarray(actions0, dtype=float)
        actions1 = np.asarray(actions1, dtype=float)
        A0, A1 = _pair_actions(actions0, actions1)
        P = len(A0)

        def _cost_fn(tt, pb, a0, a1):
            zeros = np.zeros((pb.n, d))
            return spec.running_cost(tt, pb, np.zeros(pb.n), zeros, a0, a1)

        probe_idx = np.unique(np.linspace(0, N - 1, min(N, 16)).astype(int))
        probe = PathBatch(np.array([t]), states[probe_idx][:, None, :])

        def _state_independent(fn):
            for p in range(0, P, max(1, P // 7)):
                v = np.asarray(fn(t, probe, A0[p:p + 1], A1[p:p + 1]))
                if np.ptp(v, axis=0).max(initial=0.0) > 1e-13 * (1.0 + np.abs(v).max(initial=0.0)):
                    return False
            return True

        def _table(fn, trailing):
            if _state_independent(fn):
                one = PathBatch(np.array([t]),
                                np.broadcast_to(states[:1][None, :, :], (P, 1, d)))
                return np.asarray(fn(t, one, A0, A1)).reshape(P, 1, *trailing)
            full = PathBatch(np.array([t]), states[:, None, :])
            rows = [np.asarray(fn(t, full, A0[p:p + 1], A1[p:p + 1])) for p in range(P)]
            return np.stack(rows, axis=0).reshape(P, N, *trailing)

        vol = _table(spec.vol, (d, d))
        vol2 = np.einsum("psij,pskj->psik", vol, vol)
        drift = _table(spec.drift, (d,))
        cost = _table(_cost_fn, ())
        return cls(actions0=actions0, actions1=actions1, pairs0=A0, pairs1=A1,
                   vol2=vol2, drift=drift, cost=cost, n_states=N)


def _over_states(arr2d, N):
    """(P, S) -> (P, N) by broadcast when S == 1."""
    if arr2d.shape[1] == N:
        return arr2d
    return np.broadcast_to(arr2d, (arr2d.shape[0], N))


def _slice_over_states(arr, sl, N):
    """Slice the state axis of a (P, S)-shaped table when S == N."""
    return arr if arr.shape[1] == 1 else arr[:, sl]


def minimax_field(tables: ActionTables, z, gamma, which="both",
                  z_plus=None, z_minus=None, dx=None, gamma_stencils=None,
                  want_actions=False, node_chunk=None):
    """Vectorised inf-sup / sup-inf of h over the tabulated action grid.

    z, gamma: derivative fields, shapes (N, d) and (N, d, d).

    z_plus/z_minus: optional one-sided gradients; when given (with dx), each
    (pair, coordinate) uses the central gradient where the monotone-scheme
    inequality |b_j| <= (a_jj - sum_{k != j} |a_jk|)/dx_j allows it, and the
    drift-sign-matched one-sided gradient otherwise.

    gamma_stencils: optional monotone decomposition of the trace term in place
    of ``gamma``: dict with "diag" (N, d) second differences and, for d = 2,
    "main"/"anti" (N,) diagonal directional second differences scaled by
    1/(dx0 dx1).  The cross weight attaches to the stencil matching the sign
    of the off-diagonal diffusion, keeping every neighbour weight nonnegative.

    Returns a dict with "upper"/"lower" arrays (N,) and, when requested,
    "upper_actions"/"lower_actions" as (i0, i1) index arrays (ties resolved by
    the smallest index, argmin/argmax defaults).
    """
    N = tables.n_states
    z = np.atleast_2d(np.asarray(z, dtype=float))
    d = z.shape[1]
    if gamma is not None:
        gamma = np.asarray(gamma, dtype=float)

    if node_chunk is None or node_chunk >= N:
        chunks = [slice(0, N)]
    else:
        chunks = [slice(s, min(s + node_chunk, N)) for s in range(0, N, node_chunk)]

    out_parts = {}
    for sl in chunks:
        n_c = sl.stop - sl.start
        part = _minimax_chunk(
            tables, n_c, sl,
            z[sl], None if gamma is None else gamma[sl],
            None if z_plus is None else np.atleast_2d(z_plus)[sl],
            None if z_minus is None else np.atleast_2d(z_minus)[sl],
            dx,
            None if gamma_stencils is None else
            {k: v[sl] for k, v in gamma_stencils.items()},
            which, want_actions, d)
        for key, val in part.items():
            out_parts.setdefault(key, []).append(val)
    out = {}
    for key, vals in out_parts.items():
        if key.endswith("_actions"):
            out[key] = (np.concatenate([v[0] for v in vals]),
                        np.concatenate([v[1] for v in vals]))
        else:
            out[key] = np.concatenate(vals)
    return out


def _assemble_hmat(tables, sl, N, z, gamma, z_plus, z_minus, dx,
                   gamma_stencils, d):
    """h per (action pair, node) for one node chunk; shape (P, N).

    Terms whose coefficient tables are state-independent are gathered into a
    single (P, K) @ (K, N) product; state-dependent terms fall back to dense
    broadcasting.
    """
    P = tables.vol2.shape[0]
    vol2 = tables.vol2 if tables.vol2.shape[1] == 1 else tables.vol2[:, sl]
    drift = tables.drift if tables.drift.shape[1] == 1 else tables.drift[:, sl]
    cost = _slice_over_states(tables.cost, sl, N)
    diag = np.diagonal(vol2, axis1=-2, axis2=-1)        # (P, S, d)

    dense = []          # (P, N) contributions
    cols, rows = [], []  # matmul contributions: sum_k cols[k] outer rows[k]

    def _add(coeffs, field):
        # coeffs (P, S), field (N,)
        if coeffs.shape[1] == 1:
            cols.append(coeffs[:, 0])
            rows.append(field)
        else:
            dense.append(coeffs * field[None, :])

    # -- diffusion trace term
    if gamma_stencils is not None:
        diag_st = gamma_stencils["diag"]                # (N, d)
        if d == 1:
            _add(0.5 * diag[..., 0], diag_st[:, 0])
        elif d == 2:
            a01 = vol2[..., 0, 1]
            w_abs = np.abs(a01)
            w0 = 0.5 * (diag[..., 0] - w_abs * (dx[0] / dx[1]))
            w1 = 0.5 * (diag[..., 1] - w_abs * (dx[1] / dx[0]))
            if (w0.min() < -1e-12) or (w1.min() < -1e-12):
                raise InvalidArgumentError(
                    "cross diffusion dominates the diagonal; no monotone stencil")
            _add(w0, diag_st[:, 0])
            _add(w1, diag_st[:, 1])
            _add(0.5 * np.where(a01 >= 0, w_abs, 0.0), gamma_stencils["main"])
            _add(0.5 * np.where(a01 < 0, w_abs, 0.0), gamma_stencils["anti"])
        else:
            raise InvalidArgumentError("monotone stencils implemented for d <= 2")
    else:
        if vol2.shape[1] == 1:
            dense.append(0.5 * (vol2[:, 0].reshape(P, d * d) @ gamma.reshape(N, d * d).T))
        else:
            dense.append(0.5 * np.einsum("pnik,nik->pn", vol2, gamma))

    # -- drift terms
    if z_plus is None:
        for j in range(d):
            _add(drift[..., j], z[:, j])
    else:
        if dx is None:
            raise InvalidArgumentError("one-sided gradients require dx")
        off_abs = np.abs(vol2).sum(axis=-1) - np.abs(diag)  # (P, S, d)
        for j in range(d):
            bj = drift[..., j]
            slack = (diag[..., j] - off_abs[..., j]) / dx[j]
            if bj.shape[1] == 1 and slack.shape[1] == 1:
                central_ok = np.abs(bj) <= slack + 1e-14
                _add(np.where(central_ok, bj, 0.0), z[:, j])
                _add(np.where(central_ok, 0.0, np.maximum(bj, 0.0)), z_plus[:, j])
                _add(np.where(central_ok, 0.0, np.minimum(bj, 0.0)), z_minus[:, j])
            else:
                bjN = _over_states(bj, N)
                okN = _over_states(np.abs(bj) <= slack + 1e-14, N)
                upwind = (np.maximum(bjN, 0.0) * z_plus[:, j][None, :]
                          + np.minimum(bjN, 0.0) * z_minus[:, j][None, :])
                dense.append(np.where(okN, bjN * z[:, j][None, :], upwind))

    # -- running cost
    if cost.shape[1] == 1:
        cols.append(cost[:, 0])
        rows.append(np.ones(N))
    else:
        dense.append(np.ascontiguousarray(cost))

    hmat = None
    if cols:
        hmat = np.stack(cols, axis=1) @ np.stack(rows, axis=0)
    for term in dense:
        hmat = term if hmat is None else hmat + term
    return hmat


def _minimax_chunk(tables, N, sl, z, gamma, z_plus, z_minus, dx,
                   gamma_stencils, which, want_actions, d):
    hmat = _assemble_hmat(tables, sl, N, z, gamma, z_plus, z_minus, dx,
                          gamma_stencils, d)
    hcube = hmat.reshape(tables.m0, tables.m1, N)
    out = {}
    rng_n = np.arange(N)
    if which in ("upper", "both"):
        row = hcube.max(axis=1)                 # (m0, N)
        i_star = row.argmin(axis=0)             # (N,)
        out["upper"] = row[i_star, rng_n]
        if want_actions:
            per_node = hcube[i_star, :, rng_n]  # (N, m1)
            out["upper_actions"] = (i_star, per_node.argmax(axis=1))
    if which in ("lower", "both"):
        col = hcube.min(axis=0)                 # (m1, N)
        j_star = col.argmax(axis=0)
        out["lower"] = col[j_star, rng_n]
        if want_actions:
            per_node = hcube[:, j_star, rng_n]  # (m0, N)
            out["lower_actions"] = (per_node.argmin(axis=0), j_star)
    return out


def saddle_scan(tables: ActionTables, z, gamma, tol=1e-9, node_chunk=8192):
    """Per-node saddle extraction over many states at once.

    Returns dict with index arrays i0/i1 (N,), the attained values, the
    per-node worst saddle-inequality violation, per-node minimax gap, and tie
    counts (number of optimal grid actions within tol) per player.
    """
    N = tables.n_states
    z = np.atleast_2d(np.asarray(z, dtype=float))
    gamma = np.asarray(gamma, dtype=float)
    d = z.shape[1]
    chunks = [slice(s, min(s + node_chunk, N)) for s in range(0, N, node_chunk)]
    acc = {k: [] for k in ("i0", "i1", "value", "violation", "gap", "tie0", "tie1")}
    for sl in chunks:
        n_c = sl.stop - sl.start
        hmat = _assemble_hmat(tables, sl, n_c, z[sl], gamma[sl],
                              None, None, None, None, d)
        hcube = hmat.reshape(tables.m0, tables.m1, n_c)
        row_max = hcube.max(axis=1, keepdims=True)
        col_min = hcube.min(axis=0, keepdims=True)
        viol = np.maximum(row_max - hcube, hcube - col_min)  # (m0, m1, n)
        flat = viol.reshape(-1, n_c).argmin(axis=0)
        i0, i1 = np.divmod(flat, tables.m1)
        rng = np.arange(n_c)
        acc["i0"].append(i0)
        acc["i1"].append(i1)
        acc["value"].append(hcube[i0, i1, rng])
        acc["violation"].append(viol[i0, i1, rng])
        acc["gap"].append(row_max.min(axis=(0, 1)) - col_min.max(axis=(0, 1)))
        span0 = hcube[:, i1, rng]   # (m0, n)
        span1 = hcube[i0, :, rng].T  # (m1, n)
        acc["tie0"].append((span0 <= span0.min(axis=0) + tol).sum(axis=0))
        acc["tie1"].append((span1 >= span1.max(axis=0) - tol).sum(axis=0))
    return {k: np.concatenate(v) for k, v in acc.items()}
