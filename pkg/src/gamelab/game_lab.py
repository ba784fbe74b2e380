"""Scenario orchestration: method execution, cross-method reconciliation,
the strong-formulation no-value demonstration, and report emission."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import replace

import numpy as np

from . import tolerances as tol
from .bsde_solver import (RegressionBasis, extract_saddle_controls,
                          reference_forward, solve_bsde)
from .coeffs import (ControlLaw, ScenarioSpec, constant_law, load_scenario,
                     saddle_laws, sgn)
from .errors import GameLabError, InvalidArgumentError
from .hamiltonian import HamiltonianQuery, isaacs_gap, lower_H, upper_H
from .lattice_dpp import build_lattice, solve_tables, value_gap, viscosity_residual
from .pde_solver import build_grid, closed_form_error, saddle_field, solve_isaacs
from .report import Check, ExperimentReport, MethodResult
from .sde_sim import (CostEstimate, SimConfig, derive_seed, estimate_cost,
                      girsanov_weights, simulate_feedback, simulate_strong)

__all__ = ["demo_no_value", "girsanov_invariance_suite", "run"]


# ---------------------------------------------------------------------------
# CSV emission (schemas documented in the README)
# ---------------------------------------------------------------------------


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_value_table_csv(path, times, nodes, upper, lower):
    d = nodes.shape[1]
    header = ["time"] + [f"x{j+1}" for j in range(d)] + ["upper", "lower"]
    rows = []
    for k, t in enumerate(times):
        for i in range(nodes.shape[0]):
            rows.append([f"{t:.10g}", *(f"{c:.10g}" for c in nodes[i]),
                         f"{upper[k, i]:.12g}", f"{lower[k, i]:.12g}"])
    _write_csv(path, header, rows)


def write_bsde_z_csv(path, times, z_err_rms):
    rows = [[k, f"{times[k]:.10g}", f"{z_err_rms[k]:.12g}"]
            for k in range(len(z_err_rms))]
    _write_csv(path, ["step", "time", "z_rms_error"], rows)


def write_saddle_csv(path, nodes, a0, a1, tie0, tie1):
    d = nodes.shape[1]
    header = [f"x{j+1}" for j in range(d)] \
        + [f"a0_{j+1}" for j in range(a0.shape[1])] \
        + [f"a1_{j+1}" for j in range(a1.shape[1])] + ["tie0", "tie1"]
    rows = [[*(f"{c:.10g}" for c in nodes[i]),
             *(f"{c:.10g}" for c in a0[i]), *(f"{c:.10g}" for c in a1[i]),
             int(tie0[i]), int(tie1[i])] for i in range(nodes.shape[0])]
    _write_csv(path, header, rows)


def write_paths_csv(path, batch, costs):
    d = batch.states.shape[2]
    header = ["path_id", "weight"] + [f"x{j+1}_T" for j in range(d)] + ["cost"]
    rows = [[i, f"{batch.weights[i]:.12g}",
             *(f"{c:.12g}" for c in batch.states[i, -1]), f"{costs[i]:.12g}"]
            for i in range(batch.n_paths)]
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# Strong-formulation no-value demonstration
# ---------------------------------------------------------------------------


def demo_no_value(T, c, rho, cfg: SimConfig):
    """Copycat bound on the sup-inf value vs sgn-responder bound on the
    inf-sup value, simulated in strong formulation.

    Returns (lower_estimate, upper_estimate, verdict, detail).  The verdict is
    "gap" when the two bounds separate by more than 6 pooled standard errors,
    "inconclusive" when the parameters do not satisfy 2(1-rho)c^2 < T.
    """
    spec = load_scenario("strong-gap", {"T": T, "c": c, "rho": rho})
    if not 2.0 * (1.0 - rho) * c**2 < T:
        return None, None, "inconclusive", {
            "reason": f"2(1-rho)c^2 = {2*(1-rho)*c**2:.6g} >= T = {T:.6g}"}

    def copy_law(step, paths):
        return sgn(paths.states[:, step, 0])[:, None]

    copycat0 = ControlLaw(copy_law, "copycat sgn(W1)", spec.action_sets[0])
    copycat1 = ControlLaw(copy_law, "copycat sgn(W1)", spec.action_sets[1])
    low_batch = simulate_strong(spec, copycat0, copycat1,
                                replace(cfg, seed=derive_seed(cfg.seed, "copycat")))
    lower = estimate_cost(spec, low_batch)

    # alpha0 = 0 keeps x0 = E int alpha0 = 0, so the responder plays -sgn(0) = -1
    responder0 = constant_law([0.0], spec.action_sets[0], description="const 0")
    responder1 = constant_law([-1.0], spec.action_sets[1], description="const -1")
    up_batch = simulate_strong(spec, responder0, responder1,
                               replace(cfg, seed=derive_seed(cfg.seed, "responder")))
    upper = estimate_cost(spec, up_batch)

    pooled = float(np.hypot(lower.std_error, upper.std_error))
    sep = upper.mean - lower.mean
    verdict = "gap" if sep > 6.0 * pooled else "no-gap-detected"
    detail = {"separation": sep, "pooled_se": pooled,
              "copycat_value": 2.0 * (1.0 - rho) * c**2 * T,
              "responder_bound": T**2}
    return lower, upper, verdict, detail


# ---------------------------------------------------------------------------
# Girsanov invariance suite
# ---------------------------------------------------------------------------


def girsanov_invariance_suite(spec: ScenarioSpec, lam_family, cfg: SimConfig,
                              laws=None, sigmas=3.0):
    """Direct-drift vs reweighted-reduced-drift cost agreement per lambda.

    lam_family: list of (name, lam_fn) with lam_fn(t, paths, a0, a1) -> (n, d)
    such that the drift decomposes as b = (b - vol lam) + vol lam.
    Returns (rows, all_pass); each row carries both estimates, the mean
    weight, and the pass flag at ``sigmas`` pooled standard errors.
    """
    if laws is None:
        laws = saddle_laws(spec)
    rows = []
    all_pass = True
    for i, (name, lam_fn) in enumerate(lam_family):
        variant = replace(spec, girsanov=lam_fn)
        seed = derive_seed(cfg.seed, f"girsanov-{name}")
        run_cfg = replace(cfg, seed=seed)
        direct = estimate_cost(spec, simulate_feedback(spec, *laws, run_cfg))
        reduced = variant.drift_reduced()
        batch = girsanov_weights(variant, simulate_feedback(reduced, *laws, run_cfg))
        reweighted = estimate_cost(spec, batch)
        pooled = float(np.hypot(direct.std_error, reweighted.std_error))
        agree = abs(direct.mean - reweighted.mean) <= sigmas * max(pooled, 1e-300)
        w_mean = float(batch.weights.mean())
        w_se = float(batch.weights.std(ddof=1) / np.sqrt(batch.n_paths))
        w_ok = abs(w_mean - 1.0) <= sigmas * max(w_se, 1e-300)
        rows.append({"lambda": name, "direct": direct, "reweighted": reweighted,
                     "pooled_se": pooled, "mean_weight": w_mean,
                     "weight_se": w_se, "passed": bool(agree and w_ok)})
        all_pass &= rows[-1]["passed"]
    return rows, bool(all_pass)


def standard_lambda_family(spec: ScenarioSpec):
    """Zero, full-drift-removal, and constant-shift lambdas for scenarios with
    invertible volatility."""

    def lam_zero(t, paths, a0, a1):
        return np.zeros((paths.n, spec.state_dim))

    const = 0.3 * np.ones(spec.state_dim)
    const[1::2] = -0.2

    def lam_const(t, paths, a0, a1):
        return np.broadcast_to(const, (paths.n, spec.state_dim))

    family = [("zero", lam_zero)]
    if spec.girsanov is not None:
        family.append(("full-drift", spec.girsanov))
    family.append(("constant", lam_const))
    return family


# ---------------------------------------------------------------------------
# Method runners
# ---------------------------------------------------------------------------


def _origin(spec):
    return np.zeros(spec.state_dim)


def _run_bsde(spec, seed, out_dir, artifacts):
    c = tol.WEAK_DRIFT_BSDE
    cfg = SimConfig(n_steps=spec.grids.get("n_time", c["n_steps"]),
                    n_paths=c["n_paths"], seed=derive_seed(seed, "bsde"))
    fwd = reference_forward(spec, cfg)
    sol = solve_bsde(spec, spec.bsde_driver, fwd,
                     RegressionBasis("poly", degree=c["degree"]))
    artifacts["bsde_solution"] = sol
    artifacts["bsde_forward"] = fwd
    if out_dir and spec.name.startswith("weak-drift"):
        def zf(t, x):
            d = x[:, 0] - x[:, 1]
            return np.stack([2 * d, -2 * d], axis=1)
        errs = [np.sqrt(((sol.z_path[:, k] - zf(sol.times[k], fwd.states[:, k]))**2).mean())
                for k in range(sol.z_path.shape[1])]
        write_bsde_z_csv(os.path.join(out_dir, "bsde_z.csv"), sol.times, errs)
    tolerance = tol.WEAK_DRIFT_TOL["bsde"]
    target = spec.value_at_origin
    passed = abs(sol.y0.mean - target) <= tolerance if target is not None else None
    return MethodResult("bsde", sol.y0.mean, 3 * sol.y0.std_error, tolerance,
                        target=target, passed=passed,
                        extra={"n_paths": cfg.n_paths, "n_steps": cfg.n_steps,
                               "basis": sol.basis.describe()})


def _run_mc_saddle(spec, seed, out_dir, artifacts):
    c = tol.WEAK_DRIFT_MC
    cfg = SimConfig(n_steps=c["n_steps"], n_paths=c["n_paths"],
                    seed=derive_seed(seed, "mc-saddle"))
    if "bsde_solution" in artifacts and spec.saddle_map is not None:
        laws = extract_saddle_controls(artifacts["bsde_solution"],
                                       spec.saddle_map, spec.action_sets)
        origin = "bsde-extracted"
    else:
        laws = saddle_laws(spec)
        origin = "closed-form"
    batch = simulate_feedback(spec, *laws, cfg)
    est = estimate_cost(spec, batch)
    tolerance = tol.WEAK_DRIFT_TOL["mc_saddle"]
    target = spec.value_at_origin
    passed = abs(est.mean - target) <= tolerance if target is not None else None
    return MethodResult("mc_saddle", est.mean, 3 * est.std_error, tolerance,
                        target=target, passed=passed,
                        extra={"laws": origin, "n_paths": cfg.n_paths})


def _run_lattice(spec, seed, out_dir, artifacts):
    c = tol.WEAK_DRIFT_LATTICE if spec.state_dim == 2 else dict(n_t=64, n_x=121, box_half=3.0)
    half = c["box_half"]
    lat = build_lattice(spec, spec.grids.get("n_time", c["n_t"]),
                        spec.grids.get("n_space", c["n_x"]),
                        box=(-half * np.ones(spec.state_dim),
                             half * np.ones(spec.state_dim)))
    table = solve_tables(lat, spec)
    i0 = lat.node_index(_origin(spec))
    up, lo = float(table.upper[0, i0]), float(table.lower[0, i0])
    gap = value_gap(table)
    if out_dir:
        write_value_table_csv(os.path.join(out_dir, "lattice_table.csv"),
                              lat.times[:1], lat.nodes,
                              table.upper[:1], table.lower[:1])
    target = spec.value_at_origin
    tolerance = tol.WEAK_DRIFT_TOL["lattice"]
    value = 0.5 * (up + lo)
    if target is not None:
        passed = max(abs(up - target), abs(lo - target)) <= tolerance
    elif spec.name == "bilinear":
        # no Isaacs condition: the bracket must stay open by ~2T
        target = 2.0 * spec.horizon
        value = up - lo
        passed = abs(value - target) <= 0.1 * target + 1e-9
    else:
        passed = None
    return MethodResult("lattice", value, gap, tolerance, target=target,
                        passed=passed,
                        extra={"upper": up, "lower": lo, "gap_t0": gap,
                               "n_t": lat.n_steps, "n_x": len(lat.axes[0])})


def _run_pde(spec, seed, out_dir, artifacts):
    if spec.name in tol.PDE_CLOSED_FORM and spec.name != "weak-degenerate":
        # frozen study grids for the 1-d closed forms
        c = tol.PDE_CLOSED_FORM[spec.name]
        n_x, half = c["n_x"], c["box_half"]
        tolerance = c["tol"]
        na = tol.coupled_actions(n_x)
    elif spec.name == "weak-degenerate":
        n_x, half, tolerance = 101, 2.0, 0.1
        na = spec.grids.get("n_action0", 21)
    else:
        n_x = spec.grids.get("n_space", tol.WEAK_DRIFT_PDE["n_x"])
        half = tol.WEAK_DRIFT_PDE["box_half"]
        tolerance = tol.WEAK_DRIFT_TOL["pde"] if spec.name.startswith("weak-drift") else 0.1
        na = spec.grids.get("n_action0", 21)
    a0 = spec.action_grid(0, na)
    a1 = spec.action_grid(1, na)
    grid = build_grid(spec, n_x, box=(-half * np.ones(spec.state_dim),
                                      half * np.ones(spec.state_dim)),
                      actions0=a0, actions1=a1)
    up = solve_isaacs(spec, grid, "upper", a0, a1)
    lo = solve_isaacs(spec, grid, "lower", a0, a1)
    i0 = grid.node_index(_origin(spec))
    vu, vl = float(up.values[0, i0]), float(lo.values[0, i0])
    extra = {"upper": vu, "lower": vl, "n_x": n_x, "n_t": grid.n_t,
             "n_actions": na}
    if out_dir:
        stride = max(1, grid.n_t // 8)
        write_value_table_csv(os.path.join(out_dir, "pde_table.csv"),
                              grid.times[::stride], grid.nodes,
                              up.values[::stride], lo.values[::stride])
        try:
            fld = saddle_field(spec, up, lo, t_index=0, tol=0.1)
            write_saddle_csv(os.path.join(out_dir, "saddle_field.csv"),
                             grid.nodes, fld.actions0, fld.actions1,
                             fld.tie0, fld.tie1)
        except GameLabError:
            pass
    target = spec.value_at_origin
    if spec.closed_form is not None:
        err = closed_form_error(up, spec.closed_form)[0]
        extra["max_interior_error"] = err
        passed = err <= tolerance
    elif target is not None:
        passed = max(abs(vu - target), abs(vl - target)) <= tolerance
    else:
        passed = None
    return MethodResult("pde", 0.5 * (vu + vl), abs(vu - vl), tolerance,
                        target=target, passed=passed, extra=extra)


def _run_no_value(spec, seed, out_dir, artifacts):
    p = spec.params
    cfg = SimConfig(n_steps=tol.NO_VALUE["n_steps"],
                    n_paths=tol.NO_VALUE["n_paths"],
                    seed=derive_seed(seed, "no-value"))
    lower, upper, verdict, detail = demo_no_value(p["T"], p["c"], p["rho"], cfg)
    if verdict == "inconclusive":
        return MethodResult("no_value", float("nan"), 0.0, 0.0, passed=None,
                            extra={"verdict": verdict, **detail})
    ok = (lower.mean <= detail["copycat_value"] + 3 * lower.std_error
          and upper.mean >= detail["responder_bound"] - 3 * upper.std_error
          and verdict == "gap")
    return MethodResult("no_value", detail["separation"],
                        3 * detail["pooled_se"], 0.0, passed=bool(ok),
                        extra={"verdict": verdict,
                               "lower_estimate": lower.mean,
                               "lower_se": lower.std_error,
                               "upper_estimate": upper.mean,
                               "upper_se": upper.std_error, **detail})


def _run_isaacs(spec, seed, out_dir, artifacts):
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "isaacs")))
    d = spec.state_dim
    from .coeffs import SamplePath
    path = SamplePath(np.array([0.0]), np.zeros((1, d)))
    gaps = []
    duality_ok = True
    for _ in range(64):
        z = rng.normal(size=d)
        m = rng.normal(size=(d, d))
        gamma = 0.5 * (m + m.T)
        q = HamiltonianQuery(0.0, path, z=z, gamma=gamma)
        a0 = spec.action_grid(0, 41)
        a1 = spec.action_grid(1, 41)
        g = isaacs_gap(spec, q, a0, a1)
        gaps.append(g)
        duality_ok &= g >= -1e-12
    worst = float(np.max(np.abs(gaps)))
    if spec.name == "bilinear":
        q0 = HamiltonianQuery(0.0, path, z=np.zeros(d), gamma=np.zeros((d, d)))
        exact = isaacs_gap(spec, q0)
        passed = duality_ok and abs(exact - 2.0) < 1e-12
        return MethodResult("isaacs", exact, 0.0, 1e-12, target=2.0,
                            passed=bool(passed), extra={"max_abs_gap": worst})
    passed = duality_ok and worst <= 1e-3
    return MethodResult("isaacs", worst, 0.0, 1e-3, target=0.0,
                        passed=bool(passed), extra={"n_queries": 64})


def _run_girsanov(spec, seed, out_dir, artifacts):
    cfg = SimConfig(n_steps=64, n_paths=20000, seed=derive_seed(seed, "girsanov"))
    rows, all_pass = girsanov_invariance_suite(spec, standard_lambda_family(spec), cfg)
    worst = max(abs(r["direct"].mean - r["reweighted"].mean) for r in rows)
    return MethodResult("girsanov", worst, 0.0, 0.0, passed=bool(all_pass),
                        extra={"lambdas": [r["lambda"] for r in rows],
                               "mean_weights": [r["mean_weight"] for r in rows]})


_RUNNERS = {
    "bsde": _run_bsde,
    "mc_saddle": _run_mc_saddle,
    "lattice": _run_lattice,
    "pde": _run_pde,
    "no_value": _run_no_value,
    "isaacs": _run_isaacs,
    "girsanov": _run_girsanov,
}


def run(scenario: str, overrides=None, out_dir=None, seed=0,
        methods=None, quiet=True) -> ExperimentReport:
    """Run the declared method set of a scenario and assemble the report.

    Raises NotFoundError for unknown scenarios; stage failures propagate with
    the stage name attached (partial outputs are left in out_dir).
    """
    spec = load_scenario(scenario, overrides or {})
    chosen = tuple(methods) if methods else spec.methods
    report = ExperimentReport(scenario=spec.name, params=dict(spec.params),
                              grids=dict(spec.grids), seed=int(seed))
    artifacts = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for method in chosen:
        if method not in _RUNNERS:
            raise InvalidArgumentError(f"unknown method {method!r}")
        t0 = time.perf_counter()
        try:
            result = _RUNNERS[method](spec, seed, out_dir, artifacts)
        except GameLabError as exc:
            raise GameLabError(f"stage {method!r} failed: {exc}") from exc
        report.wall_clock[method] = time.perf_counter() - t0
        report.methods.append(result)
        if not quiet:
            print(f"[{method}] value={result.value:.6g} passed={result.passed}")

    # cross-method reconciliation against a shared closed-form target
    valued = [m for m in report.methods
              if m.target is not None and m.method in tol.WEAK_DRIFT_TOL]
    for i in range(len(valued)):
        for j in range(i + 1, len(valued)):
            a, b = valued[i], valued[j]
            bound = a.tolerance + b.tolerance
            delta = abs(a.value - b.value)
            report.deltas.append({"a": a.method, "b": b.method,
                                  "delta": delta, "bound": bound,
                                  "passed": bool(delta <= bound)})
    if spec.value_at_origin is not None and valued:
        ok = all(m.passed for m in valued)
        report.checks.append(Check("closed-form-within-tolerance", bool(ok),
                                   f"target {spec.value_at_origin}"))
    if out_dir:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(report.to_json())
        with open(os.path.join(out_dir, "timings.json"), "w") as fh:
            fh.write(report.timings_json())
    return report
