"""Game descriptions: coefficient functions, action sets, control laws, scenario registry.

Conventions used throughout the package:

* A "path batch" carries ``n`` discrete paths on a common time grid; coefficient
  functions are vectorised over the leading path axis and must read only the
  supplied prefix (non-anticipativity is structural during simulation and is
  additionally probed by future-perturbation tests).
* Actions are always 2-d arrays ``(n, d_i)``, broadcastable against the batch.
* ``sgn(0) = +1`` everywhere (the indicator convention ``1{x>=0} - 1{x<0}``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .errors import DomainViolationError, InvalidArgumentError, NotFoundError

__all__ = [
    "ActionSet",
    "ControlLaw",
    "PathBatch",
    "SamplePath",
    "ScenarioSpec",
    "constant_law",
    "load_scenario",
    "load_scenario_file",
    "piecewise_constant_control",
    "registry_names",
    "saddle_laws",
    "sgn",
    "zeta_bar",
    "zeta_tilde",
    "ZETA_HOLDER_CONSTANT",
    "ZETA_HOLDER_EXPONENT",
]


def sgn(x):
    """Sign with sgn(0) = +1."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# Hoelder surrogate for the oscillatory diffusion coefficient
# ---------------------------------------------------------------------------

_ZETA_K = 12
# Midpoint/half-width chosen so the range is [sqrt(2), 2]: the induced
# sqrt(zeta^2 - 1) field then stays inside the minimiser's action box [1, 2].
_ZETA_MID = (2.0 + np.sqrt(2.0)) / 2.0
_ZETA_HALF = (2.0 - np.sqrt(2.0)) / 2.0

# |S(x)-S(y)| <= sum_k 2^{-k/2} min(2^k|x-y|, 2) <= K*sqrt(2|x-y|).
ZETA_HOLDER_EXPONENT = 0.5
ZETA_HOLDER_CONSTANT = _ZETA_HALF * _ZETA_K * np.sqrt(2.0) * 1.01


def zeta_tilde(x):
    """Oscillatory-at-all-scales map R -> [sqrt(2), 2] subset of [1, 2]."""
    x = np.asarray(x, dtype=float)
    s = np.zeros_like(x)
    for k in range(1, _ZETA_K + 1):
        s += 2.0 ** (-k / 2.0) * np.sin(2.0**k * x)
    return _ZETA_MID + _ZETA_HALF * np.sin(s)


def zeta_bar(x):
    """sqrt(zeta_tilde^2 - 1); takes values in [1, sqrt(3)]."""
    return np.sqrt(zeta_tilde(x) ** 2 - 1.0)


# ---------------------------------------------------------------------------
# Action sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionSet:
    """Box ([lower, upper] per coordinate) or explicit finite list of actions."""

    dimension: int
    kind: str  # "box" | "list"
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    grid_resolution: int = 21

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidArgumentError("action dimension must be positive")
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if lo.shape != (self.dimension,) or hi.shape != (self.dimension,):
                raise InvalidArgumentError("box bounds must match the dimension")
            if np.any(lo > hi):
                raise InvalidArgumentError("box needs lower <= upper coordinatewise")
            if self.grid_resolution < 2 and np.any(lo < hi):
                raise InvalidArgumentError("need at least 2 grid points per coordinate")
            lo.flags.writeable = False
            hi.flags.writeable = False
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "list":
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.shape[0] == 0:
                raise InvalidArgumentError("explicit action list is empty")
            if pts.shape[1] != self.dimension:
                raise InvalidArgumentError("action points must match the dimension")
            if len(np.unique(pts, axis=0)) != len(pts):
                raise InvalidArgumentError("explicit action list has duplicates")
            pts.flags.writeable = False
            object.__setattr__(self, "points", pts)
        else:
            raise InvalidArgumentError(f"unknown action set kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper, grid_resolution=21):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls(dimension=lower.size, kind="box", lower=lower, upper=upper,
                   grid_resolution=grid_resolution)

    @classmethod
    def from_points(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(dimension=points.shape[1], kind="list", points=points)

    def discretize(self, resolution=None) -> np.ndarray:
        """All grid actions as an (m, dimension) array, row-major over coordinates.

        Box grids are uniform and always include both endpoints.
        """
        if self.kind == "list":
            return self.points
        res = int(resolution or self.grid_resolution)
        axes = [np.linspace(self.lower[j], self.upper[j], res if self.lower[j] < self.upper[j] else 1)
                for j in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, actions, tol=1e-9) -> np.ndarray:
        actions = np.atleast_2d(np.asarray(actions, dtype=float))
        if self.kind == "box":
            return np.all((actions >= self.lower - tol) & (actions <= self.upper + tol), axis=-1)
        dists = np.linalg.norm(actions[:, None, :] - self.points[None, :, :], axis=-1)
        return dists.min(axis=1) <= tol


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathBatch:
    """n paths on a shared grid; ``states`` has shape (n, len(grid), d)."""

    grid: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 3 or states.shape[1] != grid.shape[0]:
            raise InvalidArgumentError("states must be (n, len(grid), d)")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    @property
    def current(self):
        """Last recorded state, shape (n, d)."""
        return self.states[:, -1, :]

    def prefix(self, step: int) -> "PathBatch":
        """View of the batch truncated to grid indices 0..step."""
        return PathBatch(self.grid[: step + 1], self.states[:, : step + 1, :])


@dataclass(frozen=True)
class SamplePath:
    """One discrete trajectory on [0, T]; canonical paths start at zero."""

    grid: np.ndarray
    states: np.ndarray
    weight: float = 1.0
    brownian: Optional[np.ndarray] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("grid must be strictly increasing")
        if states.shape[0] != grid.shape[0]:
            raise InvalidArgumentError("grid and states lengths disagree")
        if states.ndim != 2:
            raise InvalidArgumentError("states must be (len(grid), d)")
        if np.any(states[0] != 0.0):
            raise InvalidArgumentError("canonical paths start at zero")
        if not self.weight > 0:
            raise InvalidArgumentError("weight must be positive")
        for arr in (grid, states):
            arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)
        if self.brownian is not None:
            br = np.asarray(self.brownian, dtype=float)
            if br.shape != states.shape:
                raise InvalidArgumentError("brownian must match states shape")
            br.flags.writeable = False
            object.__setattr__(self, "brownian", br)

    def as_batch(self) -> PathBatch:
        return PathBatch(self.grid, self.states[None, :, :])


# ---------------------------------------------------------------------------
# Control laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlLaw:
    """Non-anticipative feedback map (step, path prefix batch) -> actions (n, d_i).

    ``evaluate`` must read only ``paths.states[:, :step+1]``; simulation passes
    genuine prefixes, tests also pass future-perturbed full paths to catch
    violations.
    """

    evaluate: Callable[[int, PathBatch], np.ndarray]
    description: str
    action_set: Optional[ActionSet] = None

    def __call__(self, step: int, paths: PathBatch) -> np.ndarray:
        out = np.atleast_2d(np.asarray(self.evaluate(step, paths), dtype=float))
        if out.shape[0] == 1 and paths.n > 1:
            out = np.broadcast_to(out, (paths.n, out.shape[1]))
        return out


def constant_law(action, action_set=None, description=None) -> ControlLaw:
    action = np.atleast_1d(np.asarray(action, dtype=float))
    if action_set is not None and not action_set.contains(action[None, :])[0]:
        raise DomainViolationError(f"constant action {action} outside its set")

    def evaluate(step, paths):
        return np.broadcast_to(action, (paths.n, action.size))

    return ControlLaw(evaluate, description or f"constant {action.tolist()}",
                      action_set=action_set)


def piecewise_constant_control(partition, cells, values, action_set) -> ControlLaw:
    """Simple control: constant on each [t_i, t_{i+1}) x cell.

    partition: times t_0 = 0 < ... < t_n = T.
    cells: per interval i, a list of predicates PathBatch -> bool (n,) forming a
        partition of path space (caller-asserted); membership is evaluated on
        the prefix up to t_i only.
    values: per interval i, the matching list of actions.
    """
    partition = np.asarray(partition, dtype=float)
    if partition.ndim != 1 or len(partition) < 2 or np.any(np.diff(partition) <= 0):
        raise InvalidArgumentError("partition must be strictly increasing")
    if partition[0] != 0.0:
        raise InvalidArgumentError("partition must start at 0")
    if len(cells) != len(partition) - 1 or len(values) != len(partition) - 1:
        raise InvalidArgumentError("need one cell list and one value list per interval")
    values = [np.atleast_2d(np.asarray(v, dtype=float)) for v in values]
    for i, (cell_list, val) in enumerate(zip(cells, values)):
        if len(cell_list) != val.shape[0]:
            raise InvalidArgumentError(f"interval {i}: {len(cell_list)} cells vs {val.shape[0]} values")
        if not np.all(action_set.contains(val)):
            raise DomainViolationError(f"interval {i}: some action lies outside the set")

    def evaluate(step, paths):
        t = paths.grid[step]
        i = int(np.clip(np.searchsorted(partition, t, side="right") - 1, 0, len(cells) - 1))
        # membership is decided on the information available at t_i
        k_i = int(np.searchsorted(paths.grid, partition[i] + 1e-12, side="right") - 1)
        sub = paths.prefix(max(k_i, 0))
        out = np.empty((paths.n, values[i].shape[1]))
        assigned = np.zeros(paths.n, dtype=bool)
        for pred, val in zip(cells[i], values[i]):
            mask = np.asarray(pred(sub), dtype=bool) & ~assigned
            out[mask] = val
            assigned |= mask
        if not assigned.all():
            raise InvalidArgumentError("cell predicates do not cover all paths")
        return out

    return ControlLaw(evaluate, f"piecewise-constant on {len(cells)} intervals",
                      action_set=action_set)


# ---------------------------------------------------------------------------
# Scenario specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    """Full game description.

    Coefficient signatures (all vectorised over the path axis):
        drift(t, paths, a0, a1) -> (n, d)
        vol(t, paths, a0, a1) -> (n, d, d), symmetric
        running_cost(t, paths, y, z, a0, a1) -> (n,)   (y, z ignored when linear)
        terminal_cost(paths) -> (n,)
        girsanov(t, paths, a0, a1) -> (n, d)           (optional; drift = vol @ girsanov part)
    """

    name: str
    state_dim: int
    horizon: float
    drift: Callable
    vol: Callable
    running_cost: Callable
    terminal_cost: Callable
    action_sets: tuple
    bounds: dict
    girsanov: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    markovian: bool = True
    time_independent: bool = True
    closed_form: Optional[Callable] = None  # v(t, x (N,d)) -> (N,)
    value_at_origin: Optional[float] = None
    bsde_driver: Optional[Callable] = None  # F(t, paths, y, z (n,d)) -> (n,)
    saddle_map: Optional[Callable] = None   # z (n,d) -> (a0 (n,d0), a1 (n,d1))
    methods: tuple = ()

    @property
    def n_time(self):
        return int(self.grids.get("n_time", 64))

    @property
    def n_space(self):
        return int(self.grids.get("n_space", 61))

    def action_grid(self, player: int, resolution=None) -> np.ndarray:
        aset = self.action_sets[player]
        if resolution is None:
            resolution = self.grids.get(f"n_action{player}", aset.grid_resolution)
        return aset.discretize(resolution)

    def drift_reduced(self) -> "ScenarioSpec":
        """Same game with drift b - vol @ girsanov removed (reference dynamics)."""
        if self.girsanov is None:
            raise InvalidArgumentError(f"{self.name} declares no girsanov field")
        b, sig, lam = self.drift, self.vol, self.girsanov

        def reduced_drift(t, paths, a0, a1):
            raw = b(t, paths, a0, a1)
            shift = np.einsum("nij,nj->ni", sig(t, paths, a0, a1), lam(t, paths, a0, a1))
            return raw - shift

        return replace(self, drift=reduced_drift, name=self.name + "+reduced-drift")


def _bc(a, n, dim):
    """Broadcast an action argument to (n, dim)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 1 and n > 1:
        a = np.broadcast_to(a, (n, dim))
    return a


def _const_vol(mat):
    mat = np.asarray(mat, dtype=float)

    def vol(t, paths, a0, a1):
        return np.broadcast_to(mat, (paths.n, *mat.shape))

    return vol


def _corr_sqrt(c, rho):
    """Symmetric psd square root of c^2 [[1, rho], [rho, 1]]."""
    a = 0.5 * (np.sqrt(1.0 + rho) + np.sqrt(1.0 - rho)) * c
    b = 0.5 * (np.sqrt(1.0 + rho) - np.sqrt(1.0 - rho)) * c
    return np.array([[a, b], [b, a]])


def _zero_cost(t, paths, y, z, a0, a1):
    return np.zeros(paths.n)


def _diff_sq_terminal(paths):
    x = paths.states[:, -1, :]
    return (x[:, 0] - x[:, 1]) ** 2


# -- scenario builders -------------------------------------------------------


def _two_player_drift(t, paths, a0, a1):
    n = paths.n
    a0 = _bc(a0, n, 1)
    a1 = _bc(a1, n, 1)
    return np.concatenate([a0, a1], axis=1)


def _build_drift_pair(params, grids, name, **extra):
    T, c, rho = params["T"], params["c"], params["rho"]
    sig = _corr_sqrt(c, rho)
    box = ActionSet.box([-1.0], [1.0], grid_resolution=grids.get("n_action0", 21))

    def lam(t, paths, a0, a1):
        # b = vol @ lam requires invertible vol
        inv = np.linalg.inv(sig)
        b = _two_player_drift(t, paths, a0, a1)
        return b @ inv.T

    girsanov = lam if (c > 0 and abs(rho) < 1) else None
    return dict(
        name=name,
        state_dim=2,
        horizon=T,
        drift=_two_player_drift,
        vol=_const_vol(sig),
        running_cost=_zero_cost,
        terminal_cost=_diff_sq_terminal,
        girsanov=girsanov,
        action_sets=(box, box),
        bounds={"drift": np.sqrt(2.0), "vol": float(np.abs(sig).sum(axis=1).max()), "running_cost": 0.0},
        params=dict(params),
        grids=dict(grids),
        **extra,
    )


def _make_strong_gap(params, grids):
    return ScenarioSpec(**_build_drift_pair(params, grids, "strong-gap"), methods=("no_value",))


def _weak_drift_closed_form(params):
    T, c, rho = params["T"], params["c"], params["rho"]
    rate = 2.0 * (1.0 - rho) * c**2

    def v(t, x):
        x = np.atleast_2d(x)
        return (x[:, 0] - x[:, 1]) ** 2 + rate * (params["T"] - t)

    return v, rate * T


def _weak_drift_saddle_map(z):
    z = np.atleast_2d(z)
    return -sgn(z[:, :1]), sgn(z[:, 1:2])


def _make_weak_drift(params, grids):
    v, v0 = _weak_drift_closed_form(params)

    def bsde_driver(t, paths, y, z):
        z = np.atleast_2d(z)
        return np.abs(z[:, 1]) - np.abs(z[:, 0])

    base = _build_drift_pair(params, grids, "weak-drift-game")
    return ScenarioSpec(**base, closed_form=v, value_at_origin=v0,
                        bsde_driver=bsde_driver, saddle_map=_weak_drift_saddle_map,
                        methods=("bsde", "mc_saddle", "lattice", "pde"))


def _make_weak_degenerate(params, grids):
    v, v0 = _weak_drift_closed_form(params)
    base = _build_drift_pair(params, grids, "weak-degenerate")
    return ScenarioSpec(**base, closed_form=v, value_at_origin=v0,
                        saddle_map=_weak_drift_saddle_map, methods=("pde",))


def _barlow_vol(t, paths, a0, a1):
    n = paths.n
    a0 = _bc(a0, n, 1)
    a1 = _bc(a1, n, 1)
    s = np.sqrt(a0[:, 0] ** 2 + a1[:, 0] ** 2)
    return s[:, None, None]


def _barlow_cost(field):
    def running_cost(t, paths, y, z, a0, a1):
        a0 = _bc(a0, paths.n, 1)
        zx = field(paths.current[:, 0])
        return zx**2 - 2.0 * a0[:, 0] * zx

    return running_cost


def _sq_terminal(paths):
    return paths.states[:, -1, 0] ** 2


def _make_barlow_control(params, grids):
    T = params["T"]
    # lone maximiser action: the singleton {0}
    a0 = ActionSet.box([1.0], [2.0], grid_resolution=grids.get("n_action0", 21))
    a1 = ActionSet.from_points([[0.0]])

    def v(t, x):
        return np.atleast_2d(x)[:, 0] ** 2

    return ScenarioSpec(
        name="barlow-control", state_dim=1, horizon=T,
        drift=lambda t, paths, b0, b1: np.zeros((paths.n, 1)),
        vol=_barlow_vol,
        running_cost=_barlow_cost(zeta_tilde),
        terminal_cost=_sq_terminal,
        action_sets=(a0, a1),
        bounds={"drift": 0.0, "vol": 2.0, "running_cost": 4.0 + 2e-9},
        params=dict(params), grids=dict(grids),
        closed_form=v, value_at_origin=0.0,
        methods=("pde",),
    )


def _make_barlow_game(params, grids, name="barlow-game"):
    T = params["T"]
    a0 = ActionSet.box([1.0], [2.0], grid_resolution=grids.get("n_action0", 21))
    a1 = ActionSet.box([0.0], [1.0], grid_resolution=grids.get("n_action1", 21))

    def v(t, x):
        return np.atleast_2d(x)[:, 0] ** 2 + (T - t)

    return ScenarioSpec(
        name=name, state_dim=1, horizon=T,
        drift=lambda t, paths, b0, b1: np.zeros((paths.n, 1)),
        vol=_barlow_vol,
        running_cost=_barlow_cost(zeta_bar),
        terminal_cost=_sq_terminal,
        action_sets=(a0, a1),
        bounds={"drift": 0.0, "vol": np.sqrt(5.0), "running_cost": 4 * np.sqrt(3.0) - 3 + 1e-9},
        params=dict(params), grids=dict(grids),
        closed_form=v, value_at_origin=T,
        methods=("pde", "mc_saddle"),
    )


def _make_barlow_weak(params, grids):
    spec = _make_barlow_game(params, grids, name="barlow-weak")
    return replace(spec, methods=("mc_saddle",))


def _make_state_indep_range(params, grids):
    T, L = params["T"], params["L"]
    box = ActionSet.box([-L], [L], grid_resolution=grids.get("n_action0", 41))

    def vol(t, paths, a0, a1):
        n = paths.n
        a0 = _bc(a0, n, 1)[:, 0]
        a1 = _bc(a1, n, 1)[:, 0]
        eta = paths.current[:, 0]
        lo = ndtr(a0) + ndtr(a1)
        hi = ndtr(a0 + 1.0) + ndtr(a1 + 1.0)
        s = np.clip(eta + a0 + a1, lo, hi)
        return s[:, None, None]

    return ScenarioSpec(
        name="state-indep-range", state_dim=1, horizon=T,
        drift=lambda t, paths, b0, b1: np.zeros((paths.n, 1)),
        vol=vol,
        running_cost=_zero_cost,
        terminal_cost=_sq_terminal,
        action_sets=(box, box),
        bounds={"drift": 0.0, "vol": 2.0, "running_cost": 0.0},
        params=dict(params), grids=dict(grids),
        markovian=True,
        methods=("isaacs",),
    )


def _make_bilinear(params, grids):
    T = params["T"]
    pts = ActionSet.from_points([[-1.0], [1.0]])

    def running_cost(t, paths, y, z, a0, a1):
        a0 = _bc(a0, paths.n, 1)
        a1 = _bc(a1, paths.n, 1)
        return a0[:, 0] * a1[:, 0]

    return ScenarioSpec(
        name="bilinear", state_dim=1, horizon=T,
        drift=lambda t, paths, b0, b1: np.zeros((paths.n, 1)),
        vol=_const_vol(np.array([[1.0]])),
        running_cost=running_cost,
        terminal_cost=lambda paths: np.zeros(paths.n),
        action_sets=(pts, pts),
        bounds={"drift": 0.0, "vol": 1.0, "running_cost": 1.0},
        params=dict(params), grids=dict(grids),
        methods=("lattice", "isaacs"),
    )


_DEFAULT_GRIDS = {"n_time": 64, "n_space": 61, "n_action0": 21, "n_action1": 21}

_REGISTRY = {
    "strong-gap": (_make_strong_gap, {"T": 4.0, "c": 1.0, "rho": 0.0}),
    "barlow-control": (_make_barlow_control, {"T": 1.0}),
    "barlow-game": (_make_barlow_game, {"T": 1.0}),
    "weak-drift-game": (_make_weak_drift, {"T": 1.0, "c": 1.0, "rho": 0.0}),
    "weak-degenerate": (_make_weak_degenerate, {"T": 1.0, "c": 1.0, "rho": 1.0}),
    "barlow-weak": (_make_barlow_weak, {"T": 1.0}),
    "state-indep-range": (_make_state_indep_range, {"T": 1.0, "L": 5.0}),
    "bilinear": (_make_bilinear, {"T": 1.0}),
}

_GRID_KEYS = set(_DEFAULT_GRIDS)


def registry_names():
    return sorted(_REGISTRY)


def load_scenario(name: str, overrides: Optional[dict] = None) -> ScenarioSpec:
    """Build a registered scenario; overrides may touch declared numeric
    parameters (T, c, rho, L) and grid sizes only."""
    if name not in _REGISTRY:
        raise NotFoundError(f"unknown scenario {name!r}; known: {registry_names()}")
    builder, defaults = _REGISTRY[name]
    params = dict(defaults)
    grids = dict(_DEFAULT_GRIDS)
    for key, val in (overrides or {}).items():
        if key in params:
            params[key] = float(val)
        elif key in _GRID_KEYS:
            grids[key] = int(val)
        else:
            raise InvalidArgumentError(
                f"override {key!r} is not a declared numeric parameter of {name!r}")
    if params["T"] <= 0:
        raise InvalidArgumentError("horizon T must be positive")
    return builder(params, grids)


def load_scenario_file(path) -> ScenarioSpec:
    """Scenario JSON: {"name": ..., "params": {...}, "grids": {...}}."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "name" not in doc:
        raise InvalidArgumentError(f"{path}: scenario file needs a 'name' field")
    overrides = {}
    overrides.update(doc.get("params", {}))
    overrides.update(doc.get("grids", {}))
    return load_scenario(doc["name"], overrides)


# ---------------------------------------------------------------------------
# Closed-form saddle feedback laws
# ---------------------------------------------------------------------------


def saddle_laws(spec: ScenarioSpec) -> tuple:
    """Feedback laws realising the known Hamiltonian saddle field of a scenario."""
    if spec.name.startswith("weak-drift-game") or spec.name.startswith("weak-degenerate"):

        def eval0(step, paths):
            d = paths.states[:, step, 0] - paths.states[:, step, 1]
            return -sgn(d)[:, None]

        def eval1(step, paths):
            d = paths.states[:, step, 1] - paths.states[:, step, 0]
            return sgn(d)[:, None]

        return (ControlLaw(eval0, "-sgn(x1-x2)", spec.action_sets[0]),
                ControlLaw(eval1, "sgn(x2-x1)", spec.action_sets[1]))
    if spec.name.startswith("barlow-game") or spec.name.startswith("barlow-weak"):

        def eval0(step, paths):
            return zeta_bar(paths.states[:, step, 0])[:, None]

        return (ControlLaw(eval0, "zeta_bar(x)", spec.action_sets[0]),
                constant_law([1.0], spec.action_sets[1]))
    if spec.name.startswith("barlow-control"):

        def eval0(step, paths):
            return zeta_tilde(paths.states[:, step, 0])[:, None]

        return (ControlLaw(eval0, "zeta_tilde(x)", spec.action_sets[0]),
                constant_law([0.0], spec.action_sets[1]))
    raise NotFoundError(f"no closed-form saddle law registered for {spec.name!r}")
