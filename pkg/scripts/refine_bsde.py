"""BSDE basis-enrichment study: RMS error of the regressed z field against
the closed form Z = (2(X1-X2), 2(X2-X1)) for the drift game, across candidate
enrichment sequences.  The triple frozen in gamelab.tolerances must decrease
monotonically with healthy margins across seeds.

Run:  python scripts/refine_bsde.py
"""

import numpy as np

from gamelab import load_scenario
from gamelab.bsde_solver import RegressionBasis, reference_forward, solve_bsde, z_accuracy
from gamelab.sde_sim import SimConfig, derive_seed
from gamelab.tolerances import BSDE_ZFIELD


def zform(t, x):
    d = x[:, 0] - x[:, 1]
    return np.stack([2 * d, -2 * d], axis=1)


def main():
    spec = load_scenario("weak-drift-game", {})
    for seed in (3, 17, 99):
        cfg = SimConfig(n_steps=BSDE_ZFIELD["n_steps"],
                        n_paths=BSDE_ZFIELD["n_paths"],
                        seed=derive_seed(seed, "zfield"))
        fwd = reference_forward(spec, cfg)
        rows = []
        for kind, p in [("local-const", 2), ("local-const", 4), ("local-const", 8),
                        ("poly", 0), ("poly", 1), ("poly", 2), ("poly", 3),
                        ("local-linear", 2), ("local-linear", 4)]:
            basis = RegressionBasis(kind, degree=p, partitions=p) if kind == "poly" \
                else RegressionBasis(kind, partitions=p)
            sol = solve_bsde(spec, spec.bsde_driver, fwd, basis)
            acc = z_accuracy(sol, zform, fwd)
            rows.append((basis.describe(), acc["rms"], sol.y0.mean))
        print(f"\nseed={seed}")
        for name, rms, y0 in rows:
            print(f"  {name:26s} z_rms={rms:.4f} y0={y0:.4f}")


if __name__ == "__main__":
    main()
