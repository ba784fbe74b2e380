"""Euler simulation of feedback-controlled diffusions, with Girsanov reweighting.

Two schemes share one core loop:

* ``simulate_feedback`` -- controls observe the simulated state path (weak
  formulation semantics).
* ``simulate_strong`` -- controls observe the driving noise path (strong
  formulation semantics); the dynamics coefficients still read the state.

Randomness comes from one counter-based Philox stream keyed by the config
seed; all increments are drawn in a single path-major block, so results are
bit-identical however the path loop might be partitioned across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .coeffs import ControlLaw, PathBatch, SamplePath, ScenarioSpec
from .errors import (DomainViolationError, InvalidArgumentError,
                     InvalidStateError, NumericalBlowupError)

__all__ = [
    "CostEstimate",
    "SimBatch",
    "SimConfig",
    "derive_seed",
    "estimate_cost",
    "girsanov_weights",
    "simulate_feedback",
    "simulate_strong",
]


def derive_seed(seed: int, label: str) -> int:
    """Deterministic per-stage seed split; stable across runs and platforms."""
    child = np.random.SeedSequence(entropy=int(seed),
                                   spawn_key=tuple(label.encode()))
    return int(child.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SimConfig:
    n_steps: int
    n_paths: int
    seed: int
    antithetic: bool = False

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 1:
            raise InvalidArgumentError("n_steps and n_paths must be >= 1")
        if self.antithetic and self.n_paths % 2:
            raise InvalidArgumentError("antithetic pairing needs an even path count")


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n: int


class _PathView:
    """Lazy sequence adapter presenting a SimBatch as SamplePath objects."""

    def __init__(self, batch):
        self._batch = batch

    def __len__(self):
        return self._batch.states.shape[0]

    def __getitem__(self, i):
        b = self._batch
        return SamplePath(b.grid, b.states[i], weight=float(b.weights[i]),
                          brownian=None if b.brownian is None else b.brownian[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class SimBatch:
    """Simulated trajectories on a common grid plus the controls applied."""

    grid: np.ndarray                 # (K+1,)
    states: np.ndarray               # (n, K+1, d)
    actions0: np.ndarray             # (n, K, d0)
    actions1: np.ndarray             # (n, K, d1)
    scheme: str                      # "feedback-on-X" | "noise-adapted"
    weights: np.ndarray = None       # (n,)
    brownian: Optional[np.ndarray] = None  # (n, K+1, d) cumulative noise
    antithetic: bool = False

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(self.states.shape[0]))

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def n_steps(self):
        return self.states.shape[1] - 1

    @property
    def paths(self):
        return _PathView(self)

    def as_batch(self) -> PathBatch:
        return PathBatch(self.grid, self.states)


def _check_actions(aset, actions, player, step):
    if aset is None:
        return
    ok = aset.contains(actions)
    if not np.all(ok):
        bad = actions[~ok][0]
        raise DomainViolationError(
            f"player {player} action {bad} outside its set at step {step}")


def _simulate(spec: ScenarioSpec, law0: ControlLaw, law1: ControlLaw,
              cfg: SimConfig, observe_noise: bool) -> SimBatch:
    K, n, d = cfg.n_steps, cfg.n_paths, spec.state_dim
    dt = spec.horizon / K
    grid = np.linspace(0.0, spec.horizon, K + 1)
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    dW = rng.standard_normal((n, K, d)) * np.sqrt(dt)
    if cfg.antithetic:
        dW[n // 2:] = -dW[: n // 2]

    X = np.zeros((n, K + 1, d))
    W = np.zeros((n, K + 1, d))
    np.cumsum(dW, axis=1, out=W[:, 1:])

    d0 = spec.action_sets[0].dimension
    d1 = spec.action_sets[1].dimension
    A0 = np.empty((n, K, d0))
    A1 = np.empty((n, K, d1))

    for k in range(K):
        obs = W if observe_noise else X
        prefix = PathBatch(grid[: k + 1], obs[:, : k + 1])
        a0 = law0(k, prefix)
        a1 = law1(k, prefix)
        _check_actions(law0.action_set or spec.action_sets[0], a0, 0, k)
        _check_actions(law1.action_set or spec.action_sets[1], a1, 1, k)
        A0[:, k], A1[:, k] = a0, a1
        state_prefix = PathBatch(grid[: k + 1], X[:, : k + 1])
        b = spec.drift(grid[k], state_prefix, a0, a1)
        sig = spec.vol(grid[k], state_prefix, a0, a1)
        X[:, k + 1] = X[:, k] + b * dt + np.einsum("nij,nj->ni", sig, dW[:, k])
        if not np.all(np.isfinite(X[:, k + 1])):
            raise NumericalBlowupError(step=k + 1)

    scheme = "noise-adapted" if observe_noise else "feedback-on-X"
    return SimBatch(grid=grid, states=X, actions0=A0, actions1=A1,
                    scheme=scheme, brownian=W, antithetic=cfg.antithetic)


def simulate_feedback(spec, law0, law1, cfg) -> SimBatch:
    """Euler scheme with controls evaluated on the simulated state path."""
    return _simulate(spec, law0, law1, cfg, observe_noise=False)


def simulate_strong(spec, law0, law1, cfg) -> SimBatch:
    """Euler scheme with controls evaluated on the stored noise path."""
    return _simulate(spec, law0, law1, cfg, observe_noise=True)


def girsanov_weights(spec: ScenarioSpec, batch: SimBatch) -> SimBatch:
    """Per-path exponential-martingale weights from the stored increments.

    The batch must have been simulated under the reduced drift b - vol @ lam
    (see ScenarioSpec.drift_reduced); weighting by

        exp( sum_k lam_k . dW_k - 1/2 sum_k |lam_k|^2 dt )

    then reproduces original-drift expectations.
    """
    if spec.girsanov is None:
        raise InvalidArgumentError(f"{spec.name} declares no girsanov field")
    if batch.brownian is None:
        raise InvalidStateError("batch carries no stored noise increments")
    K = batch.n_steps
    dt = batch.grid[1] - batch.grid[0]
    log_w = np.zeros(batch.n_paths)
    for k in range(K):
        prefix = PathBatch(batch.grid[: k + 1], batch.states[:, : k + 1])
        lam = spec.girsanov(batch.grid[k], prefix,
                            batch.actions0[:, k], batch.actions1[:, k])
        dWk = batch.brownian[:, k + 1] - batch.brownian[:, k]
        log_w += np.einsum("nj,nj->n", lam, dWk) - 0.5 * np.sum(lam**2, axis=1) * dt
    return replace(batch, weights=np.exp(log_w))


def estimate_cost(spec: ScenarioSpec, batch: SimBatch) -> CostEstimate:
    """Weighted mean of terminal cost plus left-endpoint quadrature of the
    running cost; the standard error respects antithetic pairing."""
    if batch.n_paths == 0:
        raise InvalidArgumentError("empty batch")
    K = batch.n_steps
    dt = batch.grid[1] - batch.grid[0]
    cost = spec.terminal_cost(batch.as_batch())
    for k in range(K):
        prefix = PathBatch(batch.grid[: k + 1], batch.states[:, : k + 1])
        zeros = np.zeros((batch.n_paths, spec.state_dim))
        f = spec.running_cost(batch.grid[k], prefix, np.zeros(batch.n_paths),
                              zeros, batch.actions0[:, k], batch.actions1[:, k])
        cost = cost + f * dt
    vals = batch.weights * cost
    if batch.antithetic:
        half = batch.n_paths // 2
        vals = 0.5 * (vals[:half] + vals[half:])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return CostEstimate(mean=mean, std_error=se, n=batch.n_paths)
