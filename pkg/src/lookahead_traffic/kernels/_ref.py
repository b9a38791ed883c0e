"""Pure-numpy stepping kernels.

This module is the behavioural reference for the compiled core in
``_core.pyx``: both consume random draws in exactly the same order (one
uniform per eligible car, in ascending cell order, for the fixed-step walk;
one waiting-time draw plus one selection draw per event for the event-driven
walk), so the two backends produce bit-identical trajectories from the same
stream state.

Conventions shared by both backends:

* ``cells`` is a length-N uint8 array of 0/1 occupancies, modified in place.
* ``rng`` is the (seed, counter) uint64 pair of an :class:`~..rng.RngStream`.
* Rate lookups are table-driven: the caller passes ``table[c]`` indexed by the
  number ``c`` of occupied cells in the look-ahead window, so both backends
  compare the *same* float values and stay in lockstep.
* The look-ahead window of the car in cell ``k`` starts one cell beyond its
  target cell, i.e. it covers cells ``k+2 .. k+m+1`` (periodic).
"""
from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def uniforms(rng: np.ndarray, count: int) -> np.ndarray:
    """Draw ``count`` uniforms on [0, 1), advancing the stream counter."""
    seed = int(rng[0])
    counter = int(rng[1])
    idx = np.arange(counter + 1, counter + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + idx * np.uint64(_GAMMA)
    z = _mix64_array(z)
    rng[1] = np.uint64((counter + count) & _MASK64)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _next_uniform(rng: np.ndarray) -> float:
    """Scalar draw; identical to ``uniforms(rng, 1)[0]`` but cheaper."""
    counter = (int(rng[1]) + 1) & _MASK64
    rng[1] = np.uint64(counter)
    z = (int(rng[0]) + counter * _GAMMA) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return (z >> 11) * _INV_2_53


def lookahead_counts(cells: np.ndarray, look: int) -> np.ndarray:
    """Occupied-cell count in each cell's look-ahead window (0s if look=0)."""
    counts = np.zeros(cells.shape[0], dtype=np.int64)
    for offset in range(2, look + 2):
        counts += np.roll(cells, -offset)
    return counts


def metropolis_advance(cells, rng, move_prob, look, n_steps) -> None:
    """Advance ``n_steps`` fixed-step sweeps in place.

    Per sweep, every car with an empty cell ahead draws one uniform (ascending
    cell order) and hops iff ``u < move_prob[c]`` where ``c`` counts occupied
    look-ahead cells.  Eligibility and window counts are all read from the
    state at the start of the sweep (double buffering), so the scan order
    cannot matter: a car and its follower are never both eligible.
    """
    n = cells.shape[0]
    for _ in range(n_steps):
        eligible = np.nonzero((cells == 1) & (np.roll(cells, -1) == 0))[0]
        if eligible.size == 0:
            continue
        counts = lookahead_counts(cells, look)[eligible]
        draws = uniforms(rng, eligible.size)
        movers = eligible[draws < move_prob[counts]]
        cells[movers] = 0
        cells[(movers + 1) % n] = 1


def _event_rates(cells, rates, look):
    """Eligible cell indices and their cumulative rates, in scan order."""
    eligible = np.nonzero((cells == 1) & (np.roll(cells, -1) == 0))[0]
    if eligible.size == 0:
        return eligible, None
    counts = lookahead_counts(cells, look)[eligible]
    return eligible, np.cumsum(rates[counts])


def _apply_move(cells, cell_index):
    n = cells.shape[0]
    cells[cell_index] = 0
    cells[(cell_index + 1) % n] = 1


def kmc_single(cells, rng, rates, look) -> float:
    """One event-driven move in place; returns the waiting time.

    Gridlock (no car has an empty cell ahead) is absorbing: the state is left
    untouched, no draws are consumed, and ``inf`` is returned.
    """
    eligible, cumulative = _event_rates(cells, rates, look)
    if eligible.size == 0:
        return math.inf
    total = float(cumulative[-1])
    wait = -math.log1p(-_next_uniform(rng)) / total
    target = _next_uniform(rng) * total
    pick = min(int(np.searchsorted(cumulative, target, side="right")),
               eligible.size - 1)
    _apply_move(cells, int(eligible[pick]))
    return wait


def kmc_advance(cells, rng, rates, look, t_now, t_end) -> float:
    """Run event-driven moves in place until the next event would pass
    ``t_end``; returns ``t_end``.

    The residual waiting time at the horizon is discarded (exponential clocks
    are memoryless, so redrawing after the snapshot is distribution-exact).
    An absorbing state simply coasts to the horizon.
    """
    while True:
        eligible, cumulative = _event_rates(cells, rates, look)
        if eligible.size == 0:
            return t_end
        total = float(cumulative[-1])
        wait = -math.log1p(-_next_uniform(rng)) / total
        if t_now + wait > t_end:
            return t_end
        t_now += wait
        target = _next_uniform(rng) * total
        pick = min(int(np.searchsorted(cumulative, target, side="right")),
                   eligible.size - 1)
        _apply_move(cells, int(eligible[pick]))
