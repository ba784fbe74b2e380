import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamelab.coeffs import (ActionSet, ControlLaw, PathBatch, SamplePath,
                            ZETA_HOLDER_CONSTANT, ZETA_HOLDER_EXPONENT,
                            constant_law, load_scenario, load_scenario_file,
                            piecewise_constant_control, registry_names,
                            saddle_laws, sgn, zeta_bar, zeta_tilde)
from gamelab.errors import (DomainViolationError, InvalidArgumentError,
                            NotFoundError)

ALL_SCENARIOS = registry_names()


def random_batch(rng, d, n=4, steps=8, horizon=1.0):
    grid = np.linspace(0.0, horizon, steps + 1)
    incr = rng.normal(size=(n, steps, d)) * np.sqrt(horizon / steps)
    states = np.zeros((n, steps + 1, d))
    states[:, 1:] = np.cumsum(incr, axis=1)
    return PathBatch(grid, states)


def test_sgn_convention():
    assert sgn(0.0) == 1.0
    assert sgn(-0.0) == 1.0
    np.testing.assert_array_equal(sgn(np.array([-2.0, 0.0, 3.0])), [-1, 1, 1])


# -- surrogate diffusion field ------------------------------------------------

def test_zeta_range():
    x = np.linspace(-50, 50, 400001)
    zt = zeta_tilde(x)
    assert zt.min() >= 1.0 and zt.max() <= 2.0
    zb = zeta_bar(x)
    assert zb.min() >= 0.0 and zb.max() <= np.sqrt(3.0) + 1e-12
    np.testing.assert_allclose(zb, np.sqrt(zt**2 - 1.0), atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100))
def test_zeta_holder_modulus(x, y):
    lhs = abs(zeta_tilde(x) - zeta_tilde(y))
    assert lhs <= ZETA_HOLDER_CONSTANT * abs(x - y) ** ZETA_HOLDER_EXPONENT + 1e-12


def test_zeta_oscillates_at_small_scales():
    # variation over a window much shorter than the coarsest wavelength
    x = np.linspace(0.123, 0.123 + 2e-3, 2001)
    assert np.ptp(zeta_tilde(x)) > 1e-4


# -- action sets ---------------------------------------------------------------

def test_box_discretize_includes_endpoints():
    box = ActionSet.box([-1.0, 0.0], [1.0, 2.0], grid_resolution=5)
    grid = box.discretize()
    assert grid.shape == (25, 2)
    for corner in ([-1, 0], [1, 2], [-1, 2], [1, 0]):
        assert any(np.allclose(g, corner) for g in grid)


def test_box_bad_bounds():
    with pytest.raises(InvalidArgumentError):
        ActionSet.box([1.0], [0.0])


def test_explicit_list_rules():
    pts = ActionSet.from_points([[-1.0], [1.0]])
    assert pts.discretize().shape == (2, 1)
    assert pts.contains(np.array([[1.0]]))[0]
    assert not pts.contains(np.array([[0.5]]))[0]
    with pytest.raises(InvalidArgumentError):
        ActionSet.from_points([[1.0], [1.0]])
    with pytest.raises(InvalidArgumentError):
        ActionSet.from_points(np.zeros((0, 1)))


# -- sample paths ---------------------------------------------------------------

def test_sample_path_invariants():
    grid = np.array([0.0, 0.5, 1.0])
    path = SamplePath(grid, np.array([[0.0], [0.3], [-0.1]]))
    assert path.weight == 1.0
    assert not path.states.flags.writeable
    with pytest.raises(InvalidArgumentError):
        SamplePath(grid, np.array([[0.1], [0.3], [-0.1]]))  # nonzero start
    with pytest.raises(InvalidArgumentError):
        SamplePath(np.array([0.0, 0.5, 0.5]), np.zeros((3, 1)))
    with pytest.raises(InvalidArgumentError):
        SamplePath(grid, np.zeros((3, 1)), weight=0.0)


# -- piecewise-constant laws -----------------------------------------------------

def test_piecewise_single_cell_constant():
    aset = ActionSet.box([-1.0], [1.0])
    law = piecewise_constant_control([0.0, 1.0], [[lambda b: np.ones(b.n, bool)]],
                                     [[[1.0]]], aset)
    batch = random_batch(np.random.default_rng(0), d=1)
    for step in range(len(batch.grid)):
        np.testing.assert_array_equal(law(step, batch), np.ones((batch.n, 1)))


def test_piecewise_splits_on_midpoint_sign():
    # two intervals; second interval's cells split on the sign of X at T/2
    aset = ActionSet.box([-1.0], [1.0])
    everything = lambda b: np.ones(b.n, bool)
    pos = lambda b: b.states[:, -1, 0] >= 0
    neg = lambda b: b.states[:, -1, 0] < 0
    law = piecewise_constant_control(
        [0.0, 0.5, 1.0],
        [[everything], [pos, neg]],
        [[[0.0]], [[1.0], [-1.0]]], aset)
    batch = random_batch(np.random.default_rng(1), d=1, n=64, steps=8)
    mid = 4  # index of t = 0.5
    expect = np.where(batch.states[:, mid, 0] >= 0, 1.0, -1.0)
    for step in (mid, mid + 1, 7):
        np.testing.assert_array_equal(law(step, batch)[:, 0], expect)
    # membership must be decided at T/2, not at the current step
    np.testing.assert_array_equal(law(7, batch)[:, 0], expect)


def test_piecewise_responder_constant():
    # the fixed responder -sgn(x0) of the gap demonstration, x0 given
    aset = ActionSet.box([-1.0], [1.0])
    for x0 in (0.7, 0.0, -1.3):
        val = -sgn(x0)
        law = piecewise_constant_control([0.0, 4.0], [[lambda b: np.ones(b.n, bool)]],
                                         [[[val]]], aset)
        batch = random_batch(np.random.default_rng(2), d=1, horizon=4.0)
        np.testing.assert_array_equal(law(3, batch), np.full((batch.n, 1), val))


def test_piecewise_errors():
    aset = ActionSet.box([-1.0], [1.0])
    ok = lambda b: np.ones(b.n, bool)
    with pytest.raises(InvalidArgumentError):
        piecewise_constant_control([0.0, 0.5, 0.4], [[ok], [ok]],
                                   [[[0.0]], [[0.0]]], aset)
    with pytest.raises(DomainViolationError):
        piecewise_constant_control([0.0, 1.0], [[ok]], [[[2.0]]], aset)


# -- scenario registry -----------------------------------------------------------

def test_registry_contents():
    for name in ["strong-gap", "barlow-control", "barlow-game", "weak-drift-game",
                 "weak-degenerate", "barlow-weak", "state-indep-range", "bilinear"]:
        assert name in ALL_SCENARIOS


def test_load_unknown_scenario():
    with pytest.raises(NotFoundError):
        load_scenario("no-such-game", {})


def test_override_rules():
    spec = load_scenario("weak-drift-game", {"T": 2.0, "n_space": 31})
    assert spec.horizon == 2.0
    assert spec.grids["n_space"] == 31
    with pytest.raises(InvalidArgumentError):
        load_scenario("weak-drift-game", {"drift": "nope"})
    with pytest.raises(InvalidArgumentError):
        load_scenario("barlow-game", {"c": 1.0})  # not a declared parameter


def test_weak_drift_coefficients():
    spec = load_scenario("weak-drift-game", {"T": 1.0, "c": 1.0, "rho": 0.0})
    batch = random_batch(np.random.default_rng(3), d=2)
    a0 = np.array([[0.4]])
    a1 = np.array([[-0.9]])
    b = spec.drift(0.5, batch, a0, a1)
    np.testing.assert_allclose(b, np.broadcast_to([0.4, -0.9], (batch.n, 2)))
    sig = spec.vol(0.5, batch, a0, a1)
    np.testing.assert_allclose(sig, np.broadcast_to(np.eye(2), (batch.n, 2, 2)))
    f = spec.running_cost(0.5, batch, np.zeros(batch.n), np.zeros((batch.n, 2)), a0, a1)
    np.testing.assert_array_equal(f, 0.0)
    xi = spec.terminal_cost(batch)
    np.testing.assert_allclose(xi, (batch.states[:, -1, 0] - batch.states[:, -1, 1]) ** 2)


def test_barlow_game_coefficients():
    spec = load_scenario("barlow-game", {})
    assert np.allclose(spec.action_sets[0].lower, [1.0])
    assert np.allclose(spec.action_sets[0].upper, [2.0])
    assert np.allclose(spec.action_sets[1].lower, [0.0])
    assert np.allclose(spec.action_sets[1].upper, [1.0])
    batch = random_batch(np.random.default_rng(4), d=1)
    a0 = np.array([[1.5]])
    a1 = np.array([[0.5]])
    sig = spec.vol(0.3, batch, a0, a1)
    sig2 = np.einsum("nij,nkj->nik", sig, sig)
    np.testing.assert_allclose(sig2[:, 0, 0], 1.5**2 + 0.5**2)
    x = batch.current[:, 0]
    f = spec.running_cost(0.3, batch, np.zeros(batch.n), np.zeros((batch.n, 1)), a0, a1)
    np.testing.assert_allclose(f, zeta_bar(x) ** 2 - 2 * 1.5 * zeta_bar(x))


def test_strong_gap_coefficients():
    spec = load_scenario("strong-gap", {"T": 4.0, "c": 1.0, "rho": 0.5})
    batch = random_batch(np.random.default_rng(5), d=2, horizon=4.0)
    sig = spec.vol(1.0, batch, np.array([[0.0]]), np.array([[0.0]]))
    sig2 = np.einsum("nij,nkj->nik", sig, sig)
    np.testing.assert_allclose(sig2[0], [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)


def test_scenario_file_roundtrip(tmp_path):
    doc = {"name": "weak-drift-game", "params": {"T": 1.5},
           "grids": {"n_time": 32, "n_space": 41, "n_action0": 11, "n_action1": 11}}
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    spec = load_scenario_file(p)
    assert spec.horizon == 1.5
    assert spec.grids["n_time"] == 32
    assert spec.action_grid(0).shape == (11, 1)


# -- non-anticipativity, symmetry, bounds -----------------------------------------

def _agreeing_pairs(rng, d, split, n=25, steps=10, horizon=1.0):
    a = random_batch(rng, d, n=n, steps=steps, horizon=horizon)
    states_b = a.states.copy()
    states_b[:, split + 1:, :] += rng.normal(size=states_b[:, split + 1:, :].shape)
    return a, PathBatch(a.grid, states_b)


@pytest.mark.parametrize("name", ALL_SCENARIOS)
def test_coefficients_nonanticipative(name):
    spec = load_scenario(name, {})
    rng = np.random.default_rng(11)
    for trial in range(10):
        split = int(rng.integers(1, 9))
        a, b = _agreeing_pairs(rng, spec.state_dim, split, horizon=spec.horizon)
        t = a.grid[split]
        a0 = spec.action_grid(0)[:1]
        a1 = spec.action_grid(1)[:1]
        for fn in (spec.drift, spec.vol):
            va = fn(t, a.prefix(split), a0, a1)
            vb = fn(t, b.prefix(split), a0, a1)
            np.testing.assert_array_equal(va, vb)
        y = np.zeros(a.n)
        z = np.zeros((a.n, spec.state_dim))
        np.testing.assert_array_equal(
            spec.running_cost(t, a.prefix(split), y, z, a0, a1),
            spec.running_cost(t, b.prefix(split), y, z, a0, a1))


@pytest.mark.parametrize("name", ["weak-drift-game", "barlow-game", "barlow-weak",
                                  "weak-degenerate", "barlow-control"])
def test_saddle_laws_nonanticipative_and_in_set(name):
    spec = load_scenario(name, {})
    law0, law1 = saddle_laws(spec)
    rng = np.random.default_rng(12)
    for trial in range(10):
        split = int(rng.integers(1, 9))
        a, b = _agreeing_pairs(rng, spec.state_dim, split)
        for law, aset in ((law0, spec.action_sets[0]), (law1, spec.action_sets[1])):
            va = law(split, a)
            vb = law(split, b)
            np.testing.assert_array_equal(va, vb)
            assert aset.contains(va).all()


@pytest.mark.parametrize("name", ALL_SCENARIOS)
def test_bounds_and_symmetry(name):
    spec = load_scenario(name, {})
    rng = np.random.default_rng(13)
    batch = random_batch(rng, spec.state_dim, n=64, horizon=spec.horizon)
    g0 = spec.action_grid(0)
    g1 = spec.action_grid(1)
    for _ in range(5):
        a0 = g0[rng.integers(0, len(g0))][None, :]
        a1 = g1[rng.integers(0, len(g1))][None, :]
        t = float(rng.uniform(0, spec.horizon))
        b = spec.drift(t, batch, a0, a1)
        sig = spec.vol(t, batch, a0, a1)
        f = spec.running_cost(t, batch, np.zeros(batch.n),
                              np.zeros((batch.n, spec.state_dim)), a0, a1)
        assert np.abs(b).max(initial=0.0) <= spec.bounds["drift"] + 1e-10
        assert np.abs(sig).max() <= spec.bounds["vol"] + 1e-10
        assert np.abs(f).max(initial=0.0) <= spec.bounds["running_cost"] + 1e-10
        asym = np.abs(sig - np.swapaxes(sig, 1, 2)).max()
        assert asym <= 1e-12


def test_constant_law_outside_set():
    aset = ActionSet.box([0.0], [1.0])
    with pytest.raises(DomainViolationError):
        constant_law([2.0], aset)


def test_drift_reduced_removes_girsanov_part():
    spec = load_scenario("weak-drift-game", {})
    red = spec.drift_reduced()
    batch = random_batch(np.random.default_rng(14), d=2)
    a0 = np.array([[0.3]])
    a1 = np.array([[-0.8]])
    np.testing.assert_allclose(red.drift(0.1, batch, a0, a1), 0.0, atol=1e-14)
