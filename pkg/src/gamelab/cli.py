"""The ``game-lab`` command line front end.

Subcommands: run, simulate, dpp, pde, bsde, hamiltonian-scan, no-value,
girsanov.  Global flags: --config <json>, --out <dir>, --seed <u64>, --quiet.
Exit codes: 0 success / all checks pass, 1 failure, 2 unknown scenario.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import game_lab
from .bsde_solver import RegressionBasis, reference_forward, solve_bsde
from .coeffs import SamplePath, load_scenario, load_scenario_file, saddle_laws
from .errors import GameLabError, NotFoundError
from .hamiltonian import HamiltonianQuery, h_matrix
from .lattice_dpp import build_lattice, solve_tables, value_gap, viscosity_residual
from .pde_solver import build_grid, closed_form_error, solve_isaacs
from .sde_sim import (SimConfig, derive_seed, estimate_cost, simulate_feedback,
                      simulate_strong)


def _load_spec(args):
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        if doc.get("name", args.scenario) != args.scenario and args.scenario:
            raise NotFoundError(
                f"config file is for {doc.get('name')!r}, not {args.scenario!r}")
        overrides.update(doc.get("params", {}))
        overrides.update(doc.get("grids", {}))
    for key in ("T", "c", "rho", "L"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return load_scenario(args.scenario, overrides), overrides


def _out_path(args, name):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)


def cmd_run(args):
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        overrides.update(doc.get("params", {}))
        overrides.update(doc.get("grids", {}))
    report = game_lab.run(args.scenario, overrides=overrides,
                          out_dir=args.out, seed=args.seed, quiet=args.quiet)
    if not args.quiet:
        for m in report.methods:
            print(f"{m.method:12s} value={m.value:.6g} +-{m.uncertainty:.3g} "
                  f"passed={m.passed}")
        print(f"report passed: {report.passed}")
    return 0 if report.passed else 1


def cmd_simulate(args):
    spec, _ = _load_spec(args)
    cfg = SimConfig(n_steps=args.nsteps, n_paths=args.npaths,
                    seed=derive_seed(args.seed, "simulate"),
                    antithetic=args.antithetic)
    laws = saddle_laws(spec)
    sim = simulate_strong if args.scheme == "strong" else simulate_feedback
    batch = sim(spec, *laws, cfg)
    est = estimate_cost(spec, batch)
    # per-path costs for the CSV
    from .coeffs import PathBatch
    costs = np.asarray(spec.terminal_cost(batch.as_batch()), dtype=float)
    dt = batch.grid[1] - batch.grid[0]
    for k in range(batch.n_steps):
        prefix = PathBatch(batch.grid[: k + 1], batch.states[:, : k + 1])
        zeros = np.zeros((batch.n_paths, spec.state_dim))
        costs += dt * spec.running_cost(batch.grid[k], prefix,
                                        np.zeros(batch.n_paths), zeros,
                                        batch.actions0[:, k], batch.actions1[:, k])
    game_lab.write_paths_csv(_out_path(args, "paths.csv"), batch, costs)
    _write_json(_out_path(args, "simulate_summary.json"),
                {"mean": est.mean, "std_error": est.std_error, "n": est.n,
                 "scheme": batch.scheme})
    if not args.quiet:
        print(f"J = {est.mean:.6g} +- {est.std_error:.3g} ({batch.scheme})")
    return 0


def cmd_dpp(args):
    spec, _ = _load_spec(args)
    t0 = time.perf_counter()
    half = args.box
    box = (-half * np.ones(spec.state_dim), half * np.ones(spec.state_dim))
    a0 = spec.action_grid(0, args.na0) if args.na0 else None
    a1 = spec.action_grid(1, args.na1) if args.na1 else None
    lat = build_lattice(spec, args.nt, args.nx, box=box, actions0=a0, actions1=a1)
    table = solve_tables(lat, spec)
    game_lab.write_value_table_csv(_out_path(args, "dpp_table.csv"),
                                   lat.times[:1], lat.nodes,
                                   table.upper[:1], table.lower[:1])
    res = viscosity_residual(table.upper, lat, spec, which="upper")
    summary = {"gap": value_gap(table), "residual_max": res.max_abs,
               "runtime_s": time.perf_counter() - t0,
               "value_at_origin_upper": float(table.upper[0, lat.node_index(np.zeros(spec.state_dim))]),
               "value_at_origin_lower": float(table.lower[0, lat.node_index(np.zeros(spec.state_dim))])}
    _write_json(_out_path(args, "dpp_summary.json"), summary)
    if not args.quiet:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_pde(args):
    spec, _ = _load_spec(args)
    t0 = time.perf_counter()
    half = args.box
    box = (-half * np.ones(spec.state_dim), half * np.ones(spec.state_dim))
    a0 = spec.action_grid(0, args.na0) if args.na0 else None
    a1 = spec.action_grid(1, args.na1) if args.na1 else None
    grid = build_grid(spec, args.nx, box=box, n_t=args.nt, actions0=a0, actions1=a1)
    up = solve_isaacs(spec, grid, "upper", a0, a1)
    lo = solve_isaacs(spec, grid, "lower", a0, a1)
    stride = max(1, grid.n_t // 8)
    game_lab.write_value_table_csv(_out_path(args, "pde_table.csv"),
                                   grid.times[::stride], grid.nodes,
                                   up.values[::stride], lo.values[::stride])
    summary = {"n_t": grid.n_t, "runtime_s": time.perf_counter() - t0,
               "upper_at_origin": up.at(0, np.zeros(spec.state_dim)),
               "lower_at_origin": lo.at(0, np.zeros(spec.state_dim))}
    if spec.closed_form is not None:
        mx, l2 = closed_form_error(up, spec.closed_form)
        summary["max_interior_error"] = mx
        summary["l2_interior_error"] = l2
    _write_json(_out_path(args, "pde_summary.json"), summary)
    if not args.quiet:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_bsde(args):
    spec, _ = _load_spec(args)
    if spec.bsde_driver is None:
        raise NotFoundError(f"{spec.name} has no registered backward driver")
    cfg = SimConfig(n_steps=args.nsteps, n_paths=args.npaths,
                    seed=derive_seed(args.seed, "bsde"))
    fwd = reference_forward(spec, cfg)
    kind, _, param = args.basis.partition(":")
    basis = RegressionBasis(kind, degree=int(param or 2)) if kind == "poly" \
        else RegressionBasis(kind, partitions=int(param or 10))
    sol = solve_bsde(spec, spec.bsde_driver, fwd, basis)
    _write_json(_out_path(args, "bsde_y0.json"),
                {"y0": sol.y0.mean, "std_error": sol.y0.std_error,
                 "n": sol.y0.n, "basis": basis.describe()})
    z_rms = [float(np.sqrt((sol.z_path[:, k] ** 2).mean()))
             for k in range(sol.z_path.shape[1])]
    game_lab.write_bsde_z_csv(_out_path(args, "bsde_z.csv"), sol.times, z_rms)
    if not args.quiet:
        print(f"y0 = {sol.y0.mean:.6g} +- {sol.y0.std_error:.3g}")
    return 0


def cmd_hamiltonian_scan(args):
    spec, _ = _load_spec(args)
    d = spec.state_dim
    path = SamplePath(np.array([0.0]), np.zeros((1, d)))
    zs = np.linspace(-args.zmax, args.zmax, args.nz)
    gammas = [float(g) for g in args.gammas.split(",")]
    rows = []
    mesh = np.meshgrid(*([zs] * d), indexing="ij")
    zpts = np.stack([m.ravel() for m in mesh], axis=-1)
    for g in gammas:
        for z in zpts:
            q = HamiltonianQuery(0.0, path, z=z, gamma=g * np.eye(d))
            mat = h_matrix(spec, q)
            up = float(mat.max(axis=1).min())
            lo = float(mat.min(axis=0).max())
            rows.append([*(f"{c:.10g}" for c in z), f"{g:.10g}",
                         f"{up:.12g}", f"{lo:.12g}", f"{up - lo:.12g}"])
    header = [f"z{j+1}" for j in range(d)] + ["gamma", "upper_H", "lower_H", "gap"]
    path_out = _out_path(args, "hamiltonian_scan.csv")
    with open(path_out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    if not args.quiet:
        print(f"wrote {len(rows)} rows to {path_out}")
    return 0


def cmd_no_value(args):
    cfg = SimConfig(n_steps=args.nsteps, n_paths=args.npaths,
                    seed=derive_seed(args.seed, "no-value"))
    lower, upper, verdict, detail = game_lab.demo_no_value(args.T, args.c,
                                                           args.rho, cfg)
    doc = {"verdict": verdict, **{k: v for k, v in detail.items()}}
    if lower is not None:
        doc.update({"lower_estimate": lower.mean, "lower_se": lower.std_error,
                    "upper_estimate": upper.mean, "upper_se": upper.std_error})
    _write_json(_out_path(args, "no_value.json"), doc)
    if not args.quiet:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_girsanov(args):
    spec, _ = _load_spec(args)
    cfg = SimConfig(n_steps=args.nsteps, n_paths=args.npaths,
                    seed=derive_seed(args.seed, "girsanov"))
    rows, all_pass = game_lab.girsanov_invariance_suite(
        spec, game_lab.standard_lambda_family(spec), cfg)
    doc = {"all_pass": all_pass,
           "rows": [{"lambda": r["lambda"], "direct": r["direct"].mean,
                     "reweighted": r["reweighted"].mean,
                     "pooled_se": r["pooled_se"],
                     "mean_weight": r["mean_weight"], "passed": r["passed"]}
                    for r in rows]}
    _write_json(_out_path(args, "girsanov.json"), doc)
    if not args.quiet:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0 if all_pass else 1


def build_parser():
    p = argparse.ArgumentParser(prog="game-lab",
                                description="zero-sum stochastic differential "
                                            "game laboratory")
    p.add_argument("--config", help="scenario JSON overriding params/grids")
    p.add_argument("--out", help="output directory", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scen(sp, nargs=None):
        sp.add_argument("--scenario", required=True)
        for key in ("T", "c", "rho", "L"):
            sp.add_argument(f"--{key}", type=float, default=None)

    sp = sub.add_parser("run", help="full method suite for a scenario")
    sp.add_argument("--scenario", required=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("simulate", help="Monte Carlo under the saddle laws")
    scen(sp)
    sp.add_argument("--npaths", type=int, default=20000)
    sp.add_argument("--nsteps", type=int, default=64)
    sp.add_argument("--scheme", choices=["feedback", "strong"], default="feedback")
    sp.add_argument("--antithetic", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("dpp", help="minimax dynamic programming on a lattice")
    scen(sp)
    sp.add_argument("--nt", type=int, default=64)
    sp.add_argument("--nx", type=int, default=61)
    sp.add_argument("--na0", type=int, default=None)
    sp.add_argument("--na1", type=int, default=None)
    sp.add_argument("--box", type=float, default=3.0, help="half-width of the state box")
    sp.set_defaults(func=cmd_dpp)

    sp = sub.add_parser("pde", help="monotone finite differences")
    scen(sp)
    sp.add_argument("--nx", type=int, default=101)
    sp.add_argument("--nt", type=int, default=None)
    sp.add_argument("--na0", type=int, default=None)
    sp.add_argument("--na1", type=int, default=None)
    sp.add_argument("--box", type=float, default=2.0)
    sp.set_defaults(func=cmd_pde)

    sp = sub.add_parser("bsde", help="regression Monte Carlo backward solve")
    scen(sp)
    sp.add_argument("--npaths", type=int, default=32768)
    sp.add_argument("--nsteps", type=int, default=64)
    sp.add_argument("--basis", default="poly:2",
                    help="poly:<degree> or local-const:<p> or local-linear:<p>")
    sp.set_defaults(func=cmd_bsde)

    sp = sub.add_parser("hamiltonian-scan", help="CSV of upper/lower H over queries")
    scen(sp)
    sp.add_argument("--zmax", type=float, default=2.0)
    sp.add_argument("--nz", type=int, default=9)
    sp.add_argument("--gammas", default="-1,0,1")
    sp.set_defaults(func=cmd_hamiltonian_scan)

    sp = sub.add_parser("no-value", help="strong-formulation gap demonstration")
    sp.add_argument("--T", type=float, default=4.0)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--rho", type=float, default=0.0)
    sp.add_argument("--npaths", type=int, default=100000)
    sp.add_argument("--nsteps", type=int, default=64)
    sp.set_defaults(func=cmd_no_value)

    sp = sub.add_parser("girsanov", help="drift-reduction invariance suite")
    scen(sp)
    sp.add_argument("--npaths", type=int, default=20000)
    sp.add_argument("--nsteps", type=int, default=64)
    sp.set_defaults(func=cmd_girsanov)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GameLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
