"""Lattice refinement study: value error and upper-lower gap at the origin
for the weak-formulation drift game under (n_t, n_x) -> (4 n_t, 2 n_x - 1)
refinements (n_x^2 quadrupled alongside n_t).

Run:  python scripts/refine_lattice.py
"""

import time

import numpy as np

from gamelab import load_scenario
from gamelab.lattice_dpp import build_lattice, solve_tables, value_gap


def main():
    spec = load_scenario("weak-drift-game", {})
    box = (np.array([-3.0, -3.0]), np.array([3.0, 3.0]))
    prev_gap = None
    for n_t, n_x in [(16, 31), (64, 61), (256, 121)]:
        t0 = time.time()
        lat = build_lattice(spec, n_t, n_x, box=box)
        tab = solve_tables(lat, spec)
        i0 = lat.node_index([0.0, 0.0])
        gap = value_gap(tab)
        err = max(abs(tab.upper[0, i0] - 2.0), abs(tab.lower[0, i0] - 2.0))
        ratio = gap / prev_gap if prev_gap else float("nan")
        print(f"n_t={n_t:4d} n_x={n_x:4d}: V_up={tab.upper[0, i0]:.4f} "
              f"V_lo={tab.lower[0, i0]:.4f} err={err:.4f} gap_t0={gap:.5f} "
              f"gap_ratio={ratio:.3f} ({time.time()-t0:.1f}s)")
        prev_gap = gap


if __name__ == "__main__":
    main()
