"""Grid-refinement study for the finite-difference solver.

One refinement = double (n_x - 1), n_t per the stability bound, action grids
coupled as na - 1 = round(2 sqrt(n_x - 1)).  The max interior errors against
the closed forms and their refinement ratios printed here are the numbers
frozen into gamelab.tolerances / tests/test_acceptance.py.

Run:  python scripts/refine_pde.py
"""

import time

import numpy as np

from gamelab import load_scenario
from gamelab.pde_solver import build_grid, closed_form_error, solve_isaacs
from gamelab.tolerances import PDE_CLOSED_FORM, coupled_actions


def study(name, n_x_list):
    cfg = PDE_CLOSED_FORM[name]
    spec = load_scenario(name, cfg["overrides"])
    half = cfg["box_half"]
    box = (-half * np.ones(spec.state_dim), half * np.ones(spec.state_dim))
    print(f"\n== {name} (T={spec.horizon}, box +-{half}) ==")
    prev = None
    for n_x in n_x_list:
        na = coupled_actions(n_x)
        a0 = spec.action_grid(0, na)
        a1 = spec.action_grid(1, na)
        t0 = time.time()
        grid = build_grid(spec, n_x, box=box, actions0=a0, actions1=a1)
        sol = solve_isaacs(spec, grid, "upper", a0, a1)
        err, l2 = closed_form_error(sol, spec.closed_form)
        ratio = err / prev if prev else float("nan")
        print(f"  n_x={n_x:4d} na={na:3d} n_t={grid.n_t:6d} "
              f"max_err={err:.3e} l2={l2:.3e} ratio={ratio:.3f} "
              f"({time.time()-t0:.1f}s)")
        prev = err


if __name__ == "__main__":
    study("barlow-control", [51, 101, 201, 401])
    study("barlow-game", [51, 101, 201, 401])
    study("weak-degenerate", [51, 101, 201])
