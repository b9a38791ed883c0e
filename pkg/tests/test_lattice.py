"""Single-lattice dynamics: rates, exclusion, exact small-ring distributions."""

import math

import numpy as np
import pytest

from lookahead_traffic import oracles
from lookahead_traffic.lattice import (LatticeState, ModelParams, car_count,
                                       hop_rate_table, kmc_step,
                                       look_ahead_potential, metropolis_step,
                                       move_probability_table, red_light_ic,
                                       transition_rate)
from lookahead_traffic.rng import RngStream


def _state(bits, time=0.0):
    return LatticeState(np.array(bits, dtype=np.uint8), time=time)


# ---------------------------------------------------------------------------
# parameters and tables


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(n_cells=1)
    with pytest.raises(ValueError):
        ModelParams(n_cells=10, look_ahead=10)
    with pytest.raises(ValueError):
        ModelParams(n_cells=10, beta=-0.5)
    with pytest.raises(ValueError):
        ModelParams(n_cells=10, hop_rate=0.0)
    with pytest.raises(ValueError):
        ModelParams(n_cells=10, hop_rate=2.0, dt=0.6)  # move prob would be 1.2


def test_default_dt_keeps_move_probability_at_tenth():
    params = ModelParams(n_cells=10, hop_rate=4.3478)
    assert math.isclose(params.hop_rate * params.dt, 0.1)
    assert math.isclose(params.free_speed, 4.3478 * 22.0)


def test_rate_table_shape_and_values():
    params = ModelParams(n_cells=30, look_ahead=4, beta=2.0, hop_rate=3.0)
    table = hop_rate_table(params)
    assert table.shape == (5,)
    for c in range(5):
        assert table[c] == pytest.approx(3.0 * math.exp(-2.0 * c / 4))
    assert np.all(np.diff(table) < 0)  # more cars ahead, slower
    probs = move_probability_table(params)
    assert np.array_equal(probs, table * params.dt)
    assert probs.max() <= 1.0


def test_rate_table_collapses_without_lookahead():
    for params in (ModelParams(n_cells=8, look_ahead=0, beta=5.0),
                   ModelParams(n_cells=8, look_ahead=3, beta=0.0)):
        table = hop_rate_table(params)
        assert np.all(table == params.hop_rate)


# ---------------------------------------------------------------------------
# state, initial condition, potential


def test_red_light_block_is_one_based_inclusive():
    state = red_light_ic(700, start=20, end=60)
    assert car_count(state) == 41
    assert state.occupancy(19) == 0
    assert state.occupancy(20) == 1
    assert state.occupancy(60) == 1
    assert state.occupancy(61) == 0
    assert state.time == 0.0
    with pytest.raises(ValueError):
        red_light_ic(50, start=20, end=60)


def test_state_is_immutable_and_wraps():
    state = _state([1, 0, 1, 0])
    with pytest.raises((ValueError, RuntimeError)):
        state.cells[0] = 0
    assert state.occupancy(1) == 1
    assert state.occupancy(5) == 1      # wraps to cell 1
    assert state.occupancy(0) == 0      # wraps to cell 4
    assert _state([1, 0, 1, 0]) == state


def test_potential_skips_the_gap_cell():
    # car at cell 1; the cell immediately ahead (2) does not count, the
    # window is cells 3..2+M
    state = _state([1, 0, 1, 1, 0, 1])
    assert look_ahead_potential(state, 1, 1) == 1.0          # cell 3
    assert look_ahead_potential(state, 1, 2) == 1.0          # cells 3,4
    assert look_ahead_potential(state, 1, 3) == pytest.approx(2 / 3)
    assert look_ahead_potential(state, 1, 4) == pytest.approx(3 / 4)
    # wraparound: window of the car at cell 6 starts at cell 2
    assert look_ahead_potential(state, 6, 2) == pytest.approx(1 / 2)
    with pytest.raises(ValueError):
        look_ahead_potential(state, 1, 0)
    with pytest.raises(ValueError):
        look_ahead_potential(state, 1, 6)


def test_transition_rate_is_arrhenius_in_the_window_fraction():
    state = _state([1, 0, 1, 1, 0, 0])
    params = ModelParams(n_cells=6, look_ahead=2, beta=1.5, hop_rate=2.5)
    want = 2.5 * math.exp(-1.5 * 1.0)  # cells 3,4 both occupied
    assert transition_rate(state, 1, params) == pytest.approx(want)
    # the rate function itself ignores blocking (the steppers filter for an
    # empty target cell); an empty window gives the bare hop rate
    assert transition_rate(state, 3, params) == 2.5
    # rates never exceed the free-hop rate
    for position in range(1, 7):
        assert 0.0 < transition_rate(state, position, params) <= 2.5


# ---------------------------------------------------------------------------
# fixed-step dynamics


def test_forced_moves_rotate_a_caravan():
    # beta=0 and hop_rate*dt=1 make every eligible move certain, so the
    # update is deterministic and exercises the start-of-sweep snapshot: the
    # follower must NOT chase into the cell its leader vacates in the same
    # sweep.
    params = ModelParams(n_cells=3, look_ahead=0, beta=0.0, hop_rate=1.0, dt=1.0)
    state = _state([1, 1, 0])
    rng = RngStream(0)
    seen = []
    for _ in range(4):
        state = metropolis_step(state, params, rng)
        seen.append(tuple(int(v) for v in state.cells))
    assert seen == [(1, 0, 1), (0, 1, 1), (1, 1, 0), (1, 0, 1)]
    assert state.time == pytest.approx(4.0)


def test_full_ring_is_gridlocked():
    params = ModelParams(n_cells=5, look_ahead=1, beta=1.0, hop_rate=1.0)
    state = _state([1, 1, 1, 1, 1])
    rng = RngStream(3)
    after = metropolis_step(state, params, rng)
    assert np.array_equal(after.cells, state.cells)
    assert after.time == pytest.approx(params.dt)  # the sweep still happened
    assert rng.counter == 0  # nobody eligible, nobody draws


def test_one_step_distribution_matches_enumeration():
    # 4-ring with alternating cars, M=1, beta=1, hop_rate*dt=1/2: both cars
    # see one occupied window cell, so each hops with p = e^{-1}/2 and the
    # exact post-step density is (1-p, p, 1-p, p).
    p = 0.5 * math.exp(-1.0)
    params = ModelParams(n_cells=4, look_ahead=1, beta=1.0, hop_rate=1.0, dt=0.5)
    exact = oracles.metropolis_density((1, 0, 1, 0), params, steps=1)
    assert exact == pytest.approx([1 - p, p, 1 - p, p], abs=1e-15)

    trials = 40000
    hits = np.zeros(4)
    for trial in range(trials):
        rng = RngStream(1000 + trial)
        state = metropolis_step(_state([1, 0, 1, 0]), params, rng)
        hits += state.cells
    freq = hits / trials
    sigma = math.sqrt(p * (1 - p) / trials)
    assert np.all(np.abs(freq - exact) < 4 * sigma)


def test_metropolis_conserves_cars():
    params = ModelParams(n_cells=40, look_ahead=3, beta=2.0, hop_rate=4.0)
    rng = RngStream(17)
    state = red_light_ic(40, 5, 20)
    for _ in range(200):
        state = metropolis_step(state, params, rng)
        assert car_count(state) == 16


# ---------------------------------------------------------------------------
# event-driven dynamics


def test_kmc_event_selection_matches_enumeration():
    # cars at 1, 4, 5: only the cars at 1 and 5 can move, with rates 1 and
    # e^{-1}; the exact pick probabilities follow from the rate ratio.
    params = ModelParams(n_cells=6, look_ahead=1, beta=1.0, hop_rate=1.0)
    dist = oracles.kmc_jump_transition((1, 0, 0, 1, 1, 0), params)
    want_first = 1.0 / (1.0 + math.exp(-1.0))
    assert dist[(0, 1, 0, 1, 1, 0)] == pytest.approx(want_first)
    assert dist[(1, 0, 0, 1, 0, 1)] == pytest.approx(1 - want_first)

    trials = 40000
    first_moves = 0
    base = _state([1, 0, 0, 1, 1, 0])
    for trial in range(trials):
        rng = RngStream(5000 + trial)
        after, wait = kmc_step(base, params, rng)
        assert math.isfinite(wait) and wait > 0
        assert car_count(after) == 3
        if after.occupancy(2):
            first_moves += 1
    freq = first_moves / trials
    sigma = math.sqrt(want_first * (1 - want_first) / trials)
    assert abs(freq - want_first) < 4 * sigma


def test_kmc_waiting_time_mean_matches_total_rate():
    # single free car: waiting times are Exp(hop_rate)
    params = ModelParams(n_cells=10, look_ahead=2, beta=3.0, hop_rate=2.0)
    trials = 40000
    rng = RngStream(31)
    total = 0.0
    base = _state([1, 0, 0, 0, 0, 0, 0, 0, 0, 0])
    for _ in range(trials):
        _, wait = kmc_step(base, params, rng)
        total += wait
    mean = total / trials
    assert abs(mean - 0.5) < 4 * 0.5 / math.sqrt(trials)


def test_kmc_gridlock_is_absorbing():
    params = ModelParams(n_cells=4, look_ahead=1, beta=0.5, hop_rate=1.0)
    state = _state([1, 1, 1, 1])
    rng = RngStream(9)
    after, wait = kmc_step(state, params, rng)
    assert wait == math.inf
    assert after == state
    assert rng.counter == 0  # the absorbing state consumes no randomness


def test_kmc_advances_time_by_the_waiting_time():
    params = ModelParams(n_cells=8, look_ahead=1, beta=1.0, hop_rate=1.0)
    state = _state([1, 0, 1, 0, 0, 1, 0, 0], time=2.0)
    rng = RngStream(12)
    after, wait = kmc_step(state, params, rng)
    assert after.time == pytest.approx(2.0 + wait)
    assert car_count(after) == 3


def test_kmc_conserves_cars():
    params = ModelParams(n_cells=30, look_ahead=2, beta=1.0, hop_rate=1.5)
    state = red_light_ic(30, 4, 12)
    rng = RngStream(77)
    for _ in range(300):
        state, wait = kmc_step(state, params, rng)
        assert car_count(state) == 9
