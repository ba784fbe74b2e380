import dataclasses

import numpy as np
import pytest

from gamelab.bsde_solver import (RegressionBasis, extract_saddle_controls,
                                 reference_forward, solve_bsde, verify_saddle,
                                 z_accuracy)
from gamelab.coeffs import ControlLaw, constant_law, load_scenario, saddle_laws, sgn
from gamelab.errors import (ContractionViolationError, InvalidArgumentError,
                            RegressionDegenerateError)
from gamelab.hamiltonian import HamiltonianQuery, saddle_point
from gamelab.sde_sim import SimConfig, derive_seed, estimate_cost, simulate_feedback


def forward_cfg(seed, steps=32, paths=16384):
    return SimConfig(n_steps=steps, n_paths=paths, seed=derive_seed(seed, "fwd"))


def test_basis_validation():
    with pytest.raises(InvalidArgumentError):
        RegressionBasis("fourier")
    with pytest.raises(InvalidArgumentError):
        RegressionBasis("poly", degree=-1)
    with pytest.raises(InvalidArgumentError):
        RegressionBasis("local-const", partitions=0)


def test_poly_design_shape():
    basis = RegressionBasis("poly", degree=2)
    x = np.random.default_rng(0).normal(size=(50, 2))
    phi = basis.design(x)
    assert phi.shape == (50, 6)  # 1, x1, x2, x1^2, x1 x2, x2^2
    np.testing.assert_allclose(phi[:, 0], 1.0)


def test_zero_data_gives_zero_solution():
    spec = load_scenario("weak-drift-game", {})
    spec = dataclasses.replace(spec, terminal_cost=lambda p: np.zeros(p.n))
    fwd = reference_forward(spec, forward_cfg(1))
    sol = solve_bsde(spec, lambda t, p, y, z: np.zeros(p.n), fwd,
                     RegressionBasis("poly", degree=2))
    np.testing.assert_array_equal(sol.y_path, 0.0)
    np.testing.assert_array_equal(sol.z_path, 0.0)
    assert sol.y0.mean == 0.0


def test_linear_payoff_martingale_representation():
    v = np.array([0.6, -1.1])
    spec = load_scenario("weak-drift-game", {})
    spec = dataclasses.replace(spec, terminal_cost=lambda p: p.states[:, -1] @ v)
    fwd = reference_forward(spec, forward_cfg(2))
    sol = solve_bsde(spec, lambda t, p, y, z: np.zeros(p.n), fwd,
                     RegressionBasis("poly", degree=1))
    assert abs(sol.y0.mean) <= 3 * sol.y0.std_error
    acc = z_accuracy(sol, lambda t, x: np.broadcast_to(v, (x.shape[0], 2)), fwd)
    assert acc["rms"] <= 0.15  # exact up to regression noise


def test_terminal_consistency_exact():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(3))
    sol = solve_bsde(spec, spec.bsde_driver, fwd, RegressionBasis("poly", degree=2))
    xi = spec.terminal_cost(fwd.as_batch())
    np.testing.assert_array_equal(sol.y_path[:, -1], xi)


def test_weak_drift_value():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(4, steps=64, paths=32768))
    sol = solve_bsde(spec, spec.bsde_driver, fwd,
                     RegressionBasis("poly", degree=2), lipschitz=np.sqrt(2))
    assert abs(sol.y0.mean - 2.0) <= max(3 * sol.y0.std_error, 0.05)


def test_comparison_principle_monte_carlo():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(5))
    basis = RegressionBasis("poly", degree=2)
    f2 = spec.bsde_driver
    f1 = lambda t, p, y, z: f2(t, p, y, z) - 0.25
    s1 = solve_bsde(spec, f1, fwd, basis)
    s2 = solve_bsde(spec, f2, fwd, basis)
    pooled = np.hypot(s1.y0.std_error, s2.y0.std_error)
    assert s1.y0.mean <= s2.y0.mean + 3 * pooled
    # and a terminal-cost ordering on top
    spec3 = dataclasses.replace(
        spec, terminal_cost=lambda p: (p.states[:, -1, 0] - p.states[:, -1, 1]) ** 2 + 1.0)
    s3 = solve_bsde(spec3, f2, fwd, basis)
    assert s2.y0.mean <= s3.y0.mean + 3 * np.hypot(s2.y0.std_error, s3.y0.std_error)


def test_linear_driver_matches_shift_closed_form():
    # driver mu . z with linear xi: y0 = E[xi(X + mu t)] = v . mu T
    mu = np.array([0.5, -0.3])
    v = np.array([1.0, 2.0])
    spec = load_scenario("weak-drift-game", {})
    spec = dataclasses.replace(spec, terminal_cost=lambda p: p.states[:, -1] @ v)
    fwd = reference_forward(spec, forward_cfg(6))
    sol = solve_bsde(spec, lambda t, p, y, z: z @ mu, fwd,
                     RegressionBasis("poly", degree=1), lipschitz=float(np.abs(mu).sum()))
    expect = float(v @ mu) * spec.horizon
    assert abs(sol.y0.mean - expect) <= max(3 * sol.y0.std_error, 0.05)


def test_stability_under_path_doubling():
    spec = load_scenario("weak-drift-game", {})
    basis = RegressionBasis("poly", degree=2)
    sols = []
    for paths in (8192, 16384):
        fwd = reference_forward(spec, forward_cfg(7, paths=paths))
        sols.append(solve_bsde(spec, spec.bsde_driver, fwd, basis))
    assert abs(sols[0].y0.mean - sols[1].y0.mean) <= 3 * np.hypot(
        sols[0].y0.std_error, sols[1].y0.std_error)


def test_z_rms_improves_under_enrichment_quick():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(8, steps=8, paths=32768))

    def zform(t, x):
        d = x[:, 0] - x[:, 1]
        return np.stack([2 * d, -2 * d], axis=1)

    rms = []
    for p in (2, 4, 8):
        sol = solve_bsde(spec, spec.bsde_driver, fwd,
                         RegressionBasis("local-const", partitions=p))
        rms.append(z_accuracy(sol, zform, fwd)["rms"])
    assert rms[0] > rms[1] > rms[2]


def test_extract_saddle_map_consistent_with_hamiltonian():
    # the registered saddle map agrees with the grid saddle at gamma = 0
    spec = load_scenario("weak-drift-game", {})
    rng = np.random.default_rng(9)
    from gamelab.coeffs import SamplePath
    path = SamplePath(np.array([0.0]), np.zeros((1, 2)))
    for _ in range(15):
        z = rng.normal(size=2)
        z[np.abs(z) < 0.05] = -0.4
        rep = saddle_point(spec, HamiltonianQuery(0.0, path, z=z, gamma=np.zeros((2, 2))))
        a0, a1 = spec.saddle_map(z[None, :])
        assert rep.action[0][0] == a0[0, 0]
        assert rep.action[1][0] == a1[0, 0]


def test_extracted_controls_reproduce_value():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(10, steps=64, paths=32768))
    sol = solve_bsde(spec, spec.bsde_driver, fwd, RegressionBasis("poly", degree=2))
    laws = extract_saddle_controls(sol, spec.saddle_map, spec.action_sets)
    cfg = SimConfig(n_steps=64, n_paths=20000, seed=derive_seed(10, "mc"))
    est = estimate_cost(spec, simulate_feedback(spec, *laws, cfg))
    assert abs(est.mean - 2.0) <= max(3 * est.std_error, 0.06)


def test_verify_saddle_weak_drift():
    spec = load_scenario("weak-drift-game", {})
    laws = saddle_laws(spec)
    a0set, a1set = spec.action_sets
    devs0 = [constant_law([0.0], a0set, description="const 0"),
             constant_law([1.0], a0set, description="const +1"),
             constant_law([-1.0], a0set, description="const -1"),
             ControlLaw(lambda k, p: sgn(p.states[:, k, 0] - p.states[:, k, 1])[:, None],
                        "anti-saddle p0", a0set)]
    devs1 = [constant_law([0.0], a1set, description="const 0"),
             constant_law([1.0], a1set, description="const +1"),
             constant_law([-1.0], a1set, description="const -1"),
             ControlLaw(lambda k, p: sgn(p.states[:, k, 0] - p.states[:, k, 1])[:, None],
                        "anti-saddle p1", a1set)]
    cfg = SimConfig(n_steps=32, n_paths=8000, seed=derive_seed(3, "verify"))
    check = verify_saddle(spec, laws, devs0, devs1, cfg)
    assert check.all_hold
    assert abs(check.candidate_cost.mean - 2.0) <= 0.1
    assert len(check.rows) == 8


def test_verify_saddle_candidate_equals_deviation():
    spec = load_scenario("weak-drift-game", {})
    laws = saddle_laws(spec)
    cfg = SimConfig(n_steps=16, n_paths=2000, seed=derive_seed(4, "verify"))
    check = verify_saddle(spec, laws, [laws[0]], [laws[1]], cfg)
    assert check.all_hold
    # identical laws under common random numbers give identical costs
    for label, player, est, pooled, ok in check.rows:
        assert est.mean == check.candidate_cost.mean


def test_verify_saddle_barlow():
    spec = load_scenario("barlow-game", {})
    laws = saddle_laws(spec)
    a0set = spec.action_sets[0]
    devs0 = [constant_law([1.0], a0set, description="const 1"),
             constant_law([2.0], a0set, description="const 2")]
    cfg = SimConfig(n_steps=64, n_paths=20000, seed=derive_seed(5, "verify"))
    check = verify_saddle(spec, laws, devs0, [], cfg)
    assert check.all_hold
    assert abs(check.candidate_cost.mean - 1.0) <= 0.1
    for label, player, est, pooled, ok in check.rows:
        assert est.mean >= check.candidate_cost.mean - 3 * pooled


def test_contraction_violation():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(11, steps=2, paths=128))
    with pytest.raises(ContractionViolationError):
        solve_bsde(spec, spec.bsde_driver, fwd,
                   RegressionBasis("poly", degree=1), lipschitz=5.0)


def test_regression_degenerate_on_bad_design():
    spec = load_scenario("weak-drift-game", {})
    fwd = reference_forward(spec, forward_cfg(12, steps=4, paths=64))
    bad = dataclasses.replace(fwd, states=np.where(np.isfinite(fwd.states),
                                                   fwd.states, 0.0))
    bad.states[:, 2, :] = np.nan
    with pytest.raises(RegressionDegenerateError):
        solve_bsde(spec, spec.bsde_driver, bad, RegressionBasis("poly", degree=2))
