"""Traffic flow on a ring, from stochastic cells to a continuum solver.

Layers, from micro to macro:

* :mod:`~lookahead_traffic.lattice` — exclusion process with a look-ahead
  slowdown; fixed-step and event-driven steppers.
* :mod:`~lookahead_traffic.ensemble` — seeded Monte-Carlo ensembles and the
  per-cell statistics used to judge the closures.
* :mod:`~lookahead_traffic.meso` — deterministic cell-density ODEs: the
  exponential mean-field closure, the product closure, and its empirical
  correction; RK4 integrator.
* :mod:`~lookahead_traffic.continuum` — nonlocal conservation law solved with
  an upwind finite-volume scheme.
* :mod:`~lookahead_traffic.harness` — experiment presets, config parsing and
  CSV outputs (also exposed via the ``lookahead-traffic`` CLI).
"""
from .kernels import BACKEND as kernel_backend
from .lattice import (
    LatticeState,
    ModelParams,
    car_count,
    kmc_step,
    look_ahead_potential,
    metropolis_step,
    red_light_ic,
    transition_rate,
)
from .rng import RngStream, derive_seed

__version__ = "0.1.0"

__all__ = [
    "LatticeState",
    "ModelParams",
    "RngStream",
    "car_count",
    "derive_seed",
    "kernel_backend",
    "kmc_step",
    "look_ahead_potential",
    "metropolis_step",
    "red_light_ic",
    "transition_rate",
    "__version__",
]
