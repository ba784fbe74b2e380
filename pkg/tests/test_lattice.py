import dataclasses

import numpy as np
import pytest

from gamelab.coeffs import ActionSet, ScenarioSpec, load_scenario
from gamelab.errors import InvalidArgumentError, StabilityViolationError
from gamelab.lattice_dpp import (build_lattice, minimax_step, solve_tables,
                                 table_from_function, value_gap,
                                 viscosity_residual)


def test_interior_trinomial_probabilities():
    # b = 0, sigma = 1, d = 1: interior nodes get (p, 1-2p, p), p = dt/(2 dx^2)
    spec = load_scenario("bilinear", {})
    lat = build_lattice(spec, n_t=4, n_x=7, box=([-3.0], [3.0]))
    dt, dx = lat.dt, lat.dx[0]
    p = dt / (2 * dx**2)
    idx, probs = lat.transition_vector(0, 3)
    np.testing.assert_array_equal(idx, [2, 3, 4])
    np.testing.assert_allclose(probs, [p, 1 - 2 * p, p], atol=1e-14)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_pure_drift_deterministic_shift():
    # sigma = 0, b = 1 with a grid-commensurate step: mass moves one node up
    aset = ActionSet.from_points([[0.0]])
    spec = ScenarioSpec(
        name="drift-only", state_dim=1, horizon=1.0,
        drift=lambda t, p, a0, a1: np.ones((p.n, 1)),
        vol=lambda t, p, a0, a1: np.zeros((p.n, 1, 1)),
        running_cost=lambda t, p, y, z, a0, a1: np.zeros(p.n),
        terminal_cost=lambda p: p.states[:, -1, 0],
        action_sets=(aset, aset), bounds={"drift": 1, "vol": 0, "running_cost": 0})
    lat = build_lattice(spec, n_t=4, n_x=9, box=([-1.0], [1.0]))  # dt = dx = 0.25
    idx, probs = lat.transition_vector(0, 4)
    np.testing.assert_array_equal(idx, [5])
    np.testing.assert_allclose(probs, [1.0])


def test_drift_mean_exact_per_action():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=16, n_x=31, box=([-3, -3], [3, 3]))
    node = lat.node_index([0.0, 0.0])
    rng = np.random.default_rng(3)
    for pair in rng.integers(0, lat.tables.vol2.shape[0], size=8):
        idx, pr = lat.transition_vector(int(pair), node)
        mean = (lat.nodes[idx] * pr[:, None]).sum(axis=0) - lat.nodes[node]
        b = np.array([lat.tables.pairs0[pair, 0], lat.tables.pairs1[pair, 0]])
        np.testing.assert_allclose(mean, b * lat.dt, atol=1e-12)
        assert pr.sum() == pytest.approx(1.0, abs=1e-12)
        var = (lat.nodes[idx] ** 2 * pr[:, None]).sum(axis=0) \
            - lat.nodes[node] ** 2 - 2 * lat.nodes[node] * mean - mean**2
        np.testing.assert_allclose(var, lat.dt, atol=1e-12)  # sigma = I


def test_constant_terminal_is_fixed_point():
    spec = load_scenario("weak-drift-game", {})
    spec = dataclasses.replace(spec, terminal_cost=lambda p: np.full(p.n, 3.25),
                               closed_form=None, value_at_origin=None)
    lat = build_lattice(spec, n_t=8, n_x=15, box=([-2, -2], [2, 2]))
    tab = solve_tables(lat, spec)
    np.testing.assert_array_equal(tab.upper, 3.25)
    np.testing.assert_array_equal(tab.lower, 3.25)


def test_constant_shift_exact():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=8, n_x=15, box=([-2, -2], [2, 2]))
    tab = solve_tables(lat, spec)
    shifted = dataclasses.replace(
        spec, terminal_cost=lambda p: (p.states[:, -1, 0] - p.states[:, -1, 1]) ** 2 + 5.0)
    tab2 = solve_tables(lat, shifted)
    np.testing.assert_allclose(tab2.upper, tab.upper + 5.0, atol=1e-12)
    np.testing.assert_allclose(tab2.lower, tab.lower + 5.0, atol=1e-12)


def test_monotone_in_terminal_cost():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=8, n_x=15, box=([-2, -2], [2, 2]))
    tab = solve_tables(lat, spec)
    bigger = dataclasses.replace(
        spec, terminal_cost=lambda p: (p.states[:, -1, 0] - p.states[:, -1, 1]) ** 2
        + np.maximum(p.states[:, -1, 0], 0.0))
    tab2 = solve_tables(lat, bigger)
    assert np.all(tab2.upper >= tab.upper - 1e-12)
    assert np.all(tab2.lower >= tab.lower - 1e-12)


@pytest.mark.parametrize("name", ["weak-drift-game", "bilinear"])
def test_ordering_lower_below_upper(name):
    spec = load_scenario(name, {})
    box = ([-2] * spec.state_dim, [2] * spec.state_dim)
    lat = build_lattice(spec, n_t=12, n_x=15, box=box)
    tab = solve_tables(lat, spec)
    assert np.all(tab.lower <= tab.upper + 1e-10)


def test_bilinear_gap_two_t():
    spec = load_scenario("bilinear", {"T": 0.7})
    lat = build_lattice(spec, n_t=10, n_x=11, box=([-2.0], [2.0]))
    tab = solve_tables(lat, spec)
    np.testing.assert_allclose(tab.upper[0] - tab.lower[0], 2 * 0.7, atol=1e-12)
    assert value_gap(tab) == pytest.approx(1.4, abs=1e-12)


def test_dpp_one_step_self_consistency_bit_exact():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=8, n_x=15, box=([-2, -2], [2, 2]))
    tab = solve_tables(lat, spec)
    redo_up, _ = minimax_step(lat, tab.upper[1], "upper")
    redo_lo, _ = minimax_step(lat, tab.lower[1], "lower")
    assert np.array_equal(redo_up, tab.upper[0])
    assert np.array_equal(redo_lo, tab.lower[0])


def test_terminal_slice_is_cost():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=4, n_x=9, box=([-2, -2], [2, 2]))
    tab = solve_tables(lat, spec)
    exact = (lat.nodes[:, 0] - lat.nodes[:, 1]) ** 2
    np.testing.assert_array_equal(tab.upper[-1], exact)


def test_weak_drift_value_and_gap():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=16, n_x=31, box=([-3, -3], [3, 3]))
    tab = solve_tables(lat, spec)
    i0 = lat.node_index([0.0, 0.0])
    assert abs(tab.upper[0, i0] - 2.0) <= 0.1
    assert abs(tab.lower[0, i0] - 2.0) <= 0.1
    assert value_gap(tab) <= 0.1


def test_gap_refinement():
    # gap at least halves (with slack) when n_t and n_x^2 are quadrupled;
    # measured ratio ~0.09 (scripts/refine_lattice.py)
    spec = load_scenario("weak-drift-game", {})
    gaps = []
    for n_t, n_x in [(16, 31), (64, 61)]:
        lat = build_lattice(spec, n_t, n_x, box=([-3, -3], [3, 3]))
        gaps.append(value_gap(solve_tables(lat, spec)))
    assert gaps[1] <= 0.625 * gaps[0]


def test_viscosity_residual_constant_zero():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=6, n_x=11, box=([-2, -2], [2, 2]))
    vals = table_from_function(lat, lambda t, x: np.full(x.shape[0], 2.0))
    rep = viscosity_residual(vals, lat, spec, which="upper")
    assert rep.max_abs <= 1e-12


def test_viscosity_residual_closed_form_weak_drift():
    spec = load_scenario("weak-drift-game", {})
    lat = build_lattice(spec, n_t=16, n_x=31, box=([-3, -3], [3, 3]))
    vals = table_from_function(lat, spec.closed_form)
    rep = viscosity_residual(vals, lat, spec, which="upper")
    assert rep.max_abs <= 1e-10  # quadratic closed form: stencils exact


def test_viscosity_residual_barlow_refines():
    # residual of the closed form decays ~O(dt + dx + da^2)
    spec = load_scenario("barlow-game", {})
    maxima = []
    for n_t, n_x, na in [(64, 41, 21), (256, 81, 41)]:
        a0 = spec.action_grid(0, na)
        a1 = spec.action_grid(1, na)
        lat = build_lattice(spec, n_t, n_x, box=([-2.0], [2.0]),
                            actions0=a0, actions1=a1)
        vals = table_from_function(lat, spec.closed_form)
        maxima.append(viscosity_residual(vals, lat, spec, which="upper").max_abs)
    assert maxima[1] <= 0.5 * maxima[0]


def test_stability_violation_names_feasible_nt():
    spec = load_scenario("bilinear", {})  # sigma = 1
    with pytest.raises(StabilityViolationError) as err:
        build_lattice(spec, n_t=1, n_x=3, box=([-0.5], [0.5]))
    required = err.value.required_n_t
    assert required is not None and required > 1
    build_lattice(spec, n_t=required, n_x=3, box=([-0.5], [0.5]))  # no raise


def test_lattice_rejects_correlated_noise():
    spec = load_scenario("weak-degenerate", {})
    with pytest.raises(InvalidArgumentError):
        build_lattice(spec, n_t=8, n_x=9, box=([-2, -2], [2, 2]))


def test_lattice_rejects_non_markovian_and_high_dim():
    spec = load_scenario("weak-drift-game", {})
    not_markov = dataclasses.replace(spec, markovian=False)
    with pytest.raises(InvalidArgumentError):
        build_lattice(not_markov, 4, 9, box=([-1, -1], [1, 1]))
