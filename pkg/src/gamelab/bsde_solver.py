"""Regression Monte Carlo (backward least squares) for backward SDEs.

Given a forward batch X under the reference (driftless) dynamics, solve

    y_K = xi(X),
    y_k = E[y_{k+1} | X_k] + dt * driver(t_k, X, y, z_k),

with conditional expectations replaced by least-squares projections on a
finite basis, and z from the integration-by-parts regression

    z_k = (sigma sigma^T dt)^{-1} proj( y_{k+1} (X_{k+1} - X_k) | X_k ),

which stays usably unbiased near z = 0 where the saddle maps switch sign.
The implicit y in the driver is resolved by a configurable number of Picard
iterations started at the continuation value (default 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np

from .coeffs import ControlLaw, PathBatch, ScenarioSpec
from .errors import (ContractionViolationError, InvalidArgumentError,
                     RegressionDegenerateError)
from .sde_sim import CostEstimate, SimBatch, SimConfig, simulate_feedback

__all__ = [
    "BsdeSolution",
    "RegressionBasis",
    "SaddleCheck",
    "extract_saddle_controls",
    "reference_forward",
    "solve_bsde",
    "verify_saddle",
    "z_accuracy",
]


@dataclass(frozen=True)
class RegressionBasis:
    """Polynomial or local (hypercube partition) regression basis.

    kind "poly": all monomials of total degree <= degree.
    kind "local-const"/"local-linear": indicator (times affine) functions on a
    per-coordinate equipartition of the sampled support.
    """

    kind: str = "poly"
    degree: int = 2
    partitions: int = 10

    def __post_init__(self):
        if self.kind not in ("poly", "local-const", "local-linear"):
            raise InvalidArgumentError(f"unknown basis kind {self.kind!r}")
        if self.kind == "poly" and self.degree < 0:
            raise InvalidArgumentError("polynomial degree must be >= 0")
        if self.kind.startswith("local") and self.partitions < 1:
            raise InvalidArgumentError("need at least one partition cell")

    def design(self, x: np.ndarray) -> np.ndarray:
        """Design matrix on samples x (n, d); local kinds use the empirical
        support of x itself.  Unoccupied local cells are dropped."""
        x = np.atleast_2d(x)
        n, d = x.shape
        if self.kind == "poly":
            cols = [np.ones(n)]
            for deg in range(1, self.degree + 1):
                for combo in combinations_with_replacement(range(d), deg):
                    col = np.ones(n)
                    for j in combo:
                        col = col * x[:, j]
                    cols.append(col)
            return np.stack(cols, axis=1)
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        width = np.where(hi > lo, hi - lo, 1.0)
        cell = np.minimum(((x - lo) / width * self.partitions).astype(int),
                          self.partitions - 1)
        flat = np.ravel_multi_index(tuple(cell.T), (self.partitions,) * d)
        used = np.unique(flat)
        onehot = (flat[:, None] == used[None, :]).astype(float)
        if self.kind == "local-const":
            return onehot
        cols = [onehot]
        for j in range(d):
            cols.append(onehot * x[:, j][:, None])
        return np.concatenate(cols, axis=1)

    def describe(self) -> str:
        if self.kind == "poly":
            return f"poly(degree={self.degree})"
        return f"{self.kind}(partitions={self.partitions})"


@dataclass
class _StepModel:
    t: float
    beta_z: np.ndarray       # (B, d)
    basis: RegressionBasis
    ref_x: np.ndarray        # samples defining the local support
    sig2_dt_inv: np.ndarray  # (d, d) mean normaliser

    def predict_z(self, x):
        phi = _design_like(self.basis, self.ref_x, x)
        return phi @ self.beta_z @ self.sig2_dt_inv.T


def _design_like(basis, ref_x, x):
    """Design matrix for new points with cells fitted on the reference data."""
    if basis.kind == "poly":
        return basis.design(x)
    both = np.vstack([ref_x, x])
    full = basis.design(both)
    return full[len(ref_x):]


@dataclass
class BsdeSolution:
    y0: CostEstimate
    times: np.ndarray
    y_path: np.ndarray       # (n, K+1)
    z_path: np.ndarray       # (n, K, d)
    basis: RegressionBasis
    ranks: list
    z_models: list = field(default_factory=list)


def reference_forward(spec: ScenarioSpec, cfg: SimConfig,
                      actions=None) -> SimBatch:
    """Forward batch under the driftless reference dynamics.

    Constant controls (first grid action by default) feed any action-dependent
    volatility; the drift is zeroed out.
    """
    from dataclasses import replace as _replace

    def zero_drift(t, paths, a0, a1):
        return np.zeros((paths.n, spec.state_dim))

    driftless = _replace(spec, drift=zero_drift, girsanov=None)
    if actions is None:
        actions = (spec.action_grid(0)[0], spec.action_grid(1)[0])
    from .coeffs import constant_law
    law0 = constant_law(actions[0], spec.action_sets[0])
    law1 = constant_law(actions[1], spec.action_sets[1])
    return simulate_feedback(driftless, law0, law1, cfg)


def solve_bsde(spec: ScenarioSpec, driver: Callable, forward: SimBatch,
               basis: RegressionBasis, n_picard: int = 1,
               lipschitz: Optional[float] = None) -> BsdeSolution:
    """Backward least-squares sweep along a reference forward batch.

    driver(t, paths_prefix, y (n,), z (n, d)) -> (n,).
    """
    X = forward.states
    n, K1, d = X.shape
    K = K1 - 1
    dt = forward.grid[1] - forward.grid[0]
    if lipschitz is not None and lipschitz * dt >= 1.0:
        raise ContractionViolationError(
            f"driver Lipschitz {lipschitz} times dt {dt} is >= 1")

    xi = np.asarray(spec.terminal_cost(forward.as_batch()), dtype=float)
    y = xi
    y_path = np.empty((n, K + 1))
    y_path[:, K] = xi
    z_path = np.empty((n, K, d))
    ranks = []
    z_models = [None] * K
    driver_sum = np.zeros(n)   # pathwise sum dt * driver for the y0 estimator

    for k in range(K - 1, 0, -1):
        xk = X[:, k]
        phi = basis.design(xk)
        if not np.all(np.isfinite(phi)):
            raise RegressionDegenerateError(step=k, msg=f"non-finite design at step {k}")
        beta_y, _, rank, _ = np.linalg.lstsq(phi, y, rcond=None)
        if rank < 1:
            raise RegressionDegenerateError(step=k)
        ranks.append(int(rank))
        cont = phi @ beta_y

        # centred target: E[dX | X_k] = 0 under the reference dynamics, so
        # subtracting the continuation leaves z unbiased and cuts the noise
        # from the level of y to the level of its increment
        dX = X[:, k + 1] - X[:, k]
        beta_z, _, _, _ = np.linalg.lstsq(phi, (y - cont)[:, None] * dX, rcond=None)
        proj = phi @ beta_z                       # approx E[y dX | X_k]
        prefix = PathBatch(forward.grid[: k + 1], X[:, : k + 1])
        sig = spec.vol(forward.grid[k], prefix,
                       forward.actions0[:, k], forward.actions1[:, k])
        sig2dt = np.einsum("nij,nkj->nik", sig, sig) * dt
        z = np.linalg.solve(sig2dt, proj[..., None])[..., 0]
        z_path[:, k] = z
        z_models[k] = _StepModel(t=float(forward.grid[k]), beta_z=beta_z,
                                 basis=basis, ref_x=xk,
                                 sig2_dt_inv=np.linalg.inv(sig2dt.mean(axis=0)))

        y_new = cont
        for _ in range(max(1, n_picard)):
            y_new = cont + dt * np.asarray(driver(forward.grid[k], prefix, y_new, z))
        y = y_new
        y_path[:, k] = y
        driver_sum += dt * np.asarray(driver(forward.grid[k], prefix, y, z))

    # step 0: X_0 is a single point, so the projection is the plain mean
    dX0 = X[:, 1] - X[:, 0]
    prefix0 = PathBatch(forward.grid[:1], X[:, :1])
    sig0 = spec.vol(forward.grid[0], prefix0,
                    forward.actions0[:, 0], forward.actions1[:, 0])
    sig2dt0 = (np.einsum("nij,nkj->nik", sig0, sig0) * dt).mean(axis=0)
    z0 = np.linalg.solve(sig2dt0, ((y - y.mean())[:, None] * dX0).mean(axis=0))
    z_path[:, 0] = z0
    cont0 = float(y.mean())
    y0_center = cont0
    for _ in range(max(1, n_picard)):
        y0_center = cont0 + dt * float(np.asarray(
            driver(forward.grid[0], prefix0,
                   np.full(n, y0_center), np.broadcast_to(z0, (n, d)))).mean())
    y_path[:, 0] = y + (y0_center - cont0)
    driver_sum += dt * float(np.asarray(
        driver(forward.grid[0], prefix0, np.full(n, y0_center),
               np.broadcast_to(z0, (n, d)))).mean())
    z_models[0] = None

    # y0 estimator: pathwise rollout xi + sum dt*driver along the fitted
    # (y, z) fields; its spread is the genuine Monte Carlo uncertainty
    y0_samples = xi + driver_sum
    if forward.antithetic:
        half = n // 2
        pairs = 0.5 * (y0_samples[:half] + y0_samples[half:])
        se = float(pairs.std(ddof=1) / np.sqrt(half)) if half > 1 else 0.0
    else:
        se = float(y0_samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    y0 = CostEstimate(mean=float(y0_samples.mean()), std_error=se, n=n)
    return BsdeSolution(y0=y0, times=forward.grid, y_path=y_path, z_path=z_path,
                        basis=basis, ranks=ranks[::-1], z_models=z_models)


def z_accuracy(sol: BsdeSolution, closed_form_z: Callable, forward: SimBatch,
               trim_last=2) -> dict:
    """RMS error of the regressed z field against closed_form_z(t, x)."""
    X = forward.states
    K = sol.z_path.shape[1]
    errs = []
    for k in range(0, max(1, K - trim_last)):
        exact = np.asarray(closed_form_z(sol.times[k], X[:, k]))
        errs.append(sol.z_path[:, k] - exact)
    errs = np.stack(errs)
    return {"rms": float(np.sqrt((errs**2).mean())),
            "max": float(np.abs(errs).max())}


def extract_saddle_controls(sol: BsdeSolution, saddle_map: Callable,
                            action_sets=None) -> tuple:
    """Feedback laws a = saddle_map(z_hat(t, x)) from the stored regressions.

    The laws evaluate the step-k z model nearest in time to the requested
    step, so they can drive simulations on other time grids of [0, T].
    """
    model_times = np.array([m.t if m is not None else 0.0 for m in sol.z_models])
    usable = [m for m in sol.z_models if m is not None]
    if not usable:
        raise InvalidArgumentError("solution carries no z models")
    first = next(m for m in sol.z_models if m is not None)

    def z_at(step, paths):
        t = paths.grid[step]
        k = int(np.abs(model_times - t).argmin())
        model = sol.z_models[k] or first
        return model.predict_z(paths.states[:, step, :])

    def eval0(step, paths):
        return saddle_map(z_at(step, paths))[0]

    def eval1(step, paths):
        return saddle_map(z_at(step, paths))[1]

    a0set = action_sets[0] if action_sets else None
    a1set = action_sets[1] if action_sets else None
    return (ControlLaw(eval0, "bsde-saddle p0", a0set),
            ControlLaw(eval1, "bsde-saddle p1", a1set))


@dataclass
class SaddleCheck:
    candidate_cost: CostEstimate
    rows: list                # (label, player, cost, pooled_se, ok)
    all_hold: bool


def verify_saddle(spec: ScenarioSpec, candidate: tuple, deviations0: list,
                  deviations1: list, cfg: SimConfig, sigmas=3.0) -> SaddleCheck:
    """Monte Carlo check of the saddle inequality chain with common random
    numbers: deviations of player 1 must not raise the cost above J(hat) and
    deviations of player 0 must not push it below, at ``sigmas`` pooled
    standard errors."""
    law0, law1 = candidate
    base = estimate_with(spec, law0, law1, cfg)
    rows = []
    ok_all = True
    for i, dev in enumerate(deviations1):
        est = estimate_with(spec, law0, dev, cfg)
        pooled = float(np.hypot(base.std_error, est.std_error))
        ok = est.mean <= base.mean + sigmas * pooled
        rows.append((dev.description or f"dev1[{i}]", 1, est, pooled, bool(ok)))
        ok_all &= ok
    for i, dev in enumerate(deviations0):
        est = estimate_with(spec, dev, law1, cfg)
        pooled = float(np.hypot(base.std_error, est.std_error))
        ok = base.mean <= est.mean + sigmas * pooled
        rows.append((dev.description or f"dev0[{i}]", 0, est, pooled, bool(ok)))
        ok_all &= ok
    return SaddleCheck(candidate_cost=base, rows=rows, all_hold=bool(ok_all))


def estimate_with(spec, law0, law1, cfg) -> CostEstimate:
    from .sde_sim import estimate_cost
    batch = simulate_feedback(spec, law0, law1, cfg)
    return estimate_cost(spec, batch)
