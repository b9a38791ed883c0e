"""Microscopic model: a periodic one-lane lattice of 0/1 cells.

Cars hop one cell to the right into empty cells.  A car in cell ``k`` is
slowed by traffic it can see ahead: with ``look_ahead = M >= 1`` its window
covers the ``M`` cells starting one cell *beyond* its target, i.e. cells
``k+2 .. k+M+1`` (periodic), and its hop rate is
``hop_rate * exp(-beta * occupied_fraction_of_window)``.  ``M = 0`` or
``beta = 0`` turns the slowdown off.

Two steppers evolve the same rates:

* :func:`metropolis_step` — fixed time step ``dt``; every car with an empty
  cell ahead hops independently with probability ``rate * dt`` (all
  eligibility and window reads use the pre-step state).
* :func:`kmc_step` — event-driven (Gillespie): exponential waiting time with
  the total rate, then one car chosen proportionally to its rate.

Cell positions in the public API are 1-based (cells ``1..N``), matching how
profiles are indexed in the CSV outputs; the underlying arrays are plain
0-based numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import RngStream


@dataclass(frozen=True)
class ModelParams:
    """Static model parameters.

    n_cells:    ring length N (>= 2)
    look_ahead: window length M (0 <= M < N); 0 disables the slowdown
    beta:       slowdown strength (>= 0); 0 disables the slowdown
    hop_rate:   free hop rate c0 in 1/s (> 0)
    cell_width: physical cell length h (> 0), only used for speeds/fluxes
    dt:         fixed-stepper time step; defaults to 0.1 / hop_rate
    """

    n_cells: int
    look_ahead: int = 0
    beta: float = 0.0
    hop_rate: float = 1.0
    cell_width: float = 22.0
    dt: float | None = None

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("n_cells must be >= 2")
        if not 0 <= self.look_ahead < self.n_cells:
            raise ValueError("look_ahead must satisfy 0 <= look_ahead < n_cells")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.hop_rate > 0:
            raise ValueError("hop_rate must be > 0")
        if not self.cell_width > 0:
            raise ValueError("cell_width must be > 0")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.1 / self.hop_rate)
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.hop_rate * self.dt > 1.0:
            raise ValueError(
                "hop_rate * dt = %g exceeds 1: the fixed stepper's move "
                "probability hop_rate * exp(-beta * J) * dt would not be a "
                "probability" % (self.hop_rate * self.dt)
            )

    @property
    def free_speed(self) -> float:
        """Speed of an unobstructed car, cell_width * hop_rate."""
        return self.cell_width * self.hop_rate


def hop_rate_table(params: ModelParams) -> np.ndarray:
    """Hop rate by number of occupied look-ahead cells: c0 * exp(-beta*c/M).

    Single shared table for both steppers and both kernel backends, so every
    code path compares identical float values.  Length M+1 (length 1 when
    M = 0, where the rate is plainly c0).
    """
    m = params.look_ahead
    if m == 0 or params.beta == 0.0:
        return np.full(m + 1, params.hop_rate, dtype=np.float64)
    occupied = np.arange(m + 1, dtype=np.float64)
    return params.hop_rate * np.exp(-params.beta * occupied / m)


def move_probability_table(params: ModelParams) -> np.ndarray:
    """Per-sweep move probability by window count: rate * dt, all in [0, 1]."""
    return hop_rate_table(params) * params.dt


class LatticeState:
    """Immutable snapshot of the ring: occupancies plus the current time."""

    __slots__ = ("_cells", "time")

    def __init__(self, cells, time: float = 0.0):
        arr = np.asarray(cells, dtype=np.uint8).copy()
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("cells must be a 1-D array of length >= 2")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("cells must contain only 0s and 1s")
        arr.setflags(write=False)
        self._cells = arr
        self.time = float(time)

    @property
    def cells(self) -> np.ndarray:
        """Read-only 0/1 array; index i holds cell position i+1."""
        return self._cells

    @property
    def n_cells(self) -> int:
        return self._cells.size

    def occupancy(self, position: int) -> int:
        """Occupancy of 1-based cell ``position`` (wraps around the ring)."""
        return int(self._cells[(position - 1) % self._cells.size])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatticeState):
            return NotImplemented
        return self.time == other.time and np.array_equal(self._cells, other._cells)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"LatticeState(n={self.n_cells}, cars={car_count(self)}, t={self.time:g})"


def car_count(state: LatticeState) -> int:
    """Number of cars on the ring (conserved by both steppers)."""
    return int(state.cells.sum())


def red_light_ic(n_cells: int, start: int = 20, end: int = 60) -> LatticeState:
    """Queue released at t=0: cells ``start..end`` (1-based, inclusive)
    occupied, everything else empty."""
    if not 1 <= start <= end <= n_cells:
        raise ValueError("need 1 <= start <= end <= n_cells")
    cells = np.zeros(n_cells, dtype=np.uint8)
    cells[start - 1:end] = 1
    return LatticeState(cells, 0.0)


def look_ahead_potential(state: LatticeState, position: int, look_ahead: int) -> float:
    """Occupied fraction of the look-ahead window of the car at ``position``.

    The window skips the target cell: it covers positions
    ``position+2 .. position+look_ahead+1`` on the ring.
    """
    if look_ahead < 1:
        raise ValueError("look_ahead must be >= 1 (no window exists for 0)")
    if look_ahead >= state.n_cells:
        raise ValueError("look_ahead must be < n_cells")
    cells = state.cells
    n = cells.size
    base = (position - 1) % n
    occupied = 0
    for i in range(2, look_ahead + 2):
        occupied += cells[(base + i) % n]
    return occupied / look_ahead


def transition_rate(state: LatticeState, position: int, params: ModelParams) -> float:
    """Hop rate of a car at ``position`` given the current traffic ahead.

    Exactly ``hop_rate`` when the slowdown is off (M = 0 or beta = 0).
    """
    if params.look_ahead == 0 or params.beta == 0.0:
        return params.hop_rate
    potential = look_ahead_potential(state, position, params.look_ahead)
    return params.hop_rate * math.exp(-params.beta * potential)


def _check_compatible(state: LatticeState, params: ModelParams) -> None:
    if state.n_cells != params.n_cells:
        raise ValueError(
            f"state has {state.n_cells} cells but params.n_cells = {params.n_cells}"
        )


def metropolis_step(state: LatticeState, params: ModelParams,
                    rng: RngStream) -> LatticeState:
    """One fixed-step sweep; returns the state at ``time + dt``."""
    _check_compatible(state, params)
    cells = np.array(state.cells)  # writable copy
    kernels.metropolis_advance(cells, rng.state, move_probability_table(params),
                               params.look_ahead, 1)
    return LatticeState(cells, state.time + params.dt)


def kmc_step(state: LatticeState, params: ModelParams,
             rng: RngStream) -> tuple[LatticeState, float]:
    """One event-driven move; returns (new state, waiting time).

    If no move is possible the configuration is absorbing: the input state is
    returned unchanged together with an infinite waiting time.
    """
    _check_compatible(state, params)
    cells = np.array(state.cells)
    wait = kernels.kmc_single(cells, rng.state, hop_rate_table(params),
                              params.look_ahead)
    if math.isinf(wait):
        return state, math.inf
    return LatticeState(cells, state.time + wait), wait
