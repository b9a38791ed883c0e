"""Independent reference calculations for validating the simulators.

Everything here is deliberately written the slow, obvious way — exhaustive
enumeration over configurations, plain ``math`` arithmetic, two-pass sums —
and shares no code with the production paths it is used to check.  Small
rings only: distributions are dicts keyed by occupancy tuples.

Also exposed through ``lookahead-traffic oracle <name>`` so the reference
numbers can be printed without writing a test.
"""
from __future__ import annotations

import math
from itertools import combinations

from .lattice import ModelParams


Config = tuple[int, ...]
Distribution = dict[Config, float]


def window_fraction(config: Config, index: int, look: int) -> float:
    """Occupied fraction of the look-ahead window of the car at 0-based
    ``index``: cells index+2 .. index+look+1 on the ring."""
    n = len(config)
    return sum(config[(index + 1 + i) % n] for i in range(1, look + 1)) / look


def hop_rate(config: Config, index: int, params: ModelParams) -> float:
    if params.look_ahead == 0 or params.beta == 0.0:
        return params.hop_rate
    return params.hop_rate * math.exp(
        -params.beta * window_fraction(config, index, params.look_ahead))


def eligible_cars(config: Config) -> list[int]:
    """0-based indices of cars with an empty cell ahead, ascending."""
    n = len(config)
    return [k for k in range(n) if config[k] == 1 and config[(k + 1) % n] == 0]


def _moved(config: Config, movers) -> Config:
    n = len(config)
    out = list(config)
    for k in movers:
        out[k] = 0
    for k in movers:
        out[(k + 1) % n] = 1
    return tuple(out)


def metropolis_transition(config: Config, params: ModelParams) -> Distribution:
    """Exact one-sweep outcome distribution of the fixed stepper.

    Eligible cars move independently, so the outcome law is the product of
    per-car Bernoulli(rate * dt) variables; we enumerate every subset of
    eligible cars.  Moves cannot conflict (a car and its follower are never
    both eligible), so each subset yields a single configuration.
    """
    eligible = eligible_cars(config)
    probs = {k: hop_rate(config, k, params) * params.dt for k in eligible}
    outcomes: Distribution = {}
    for size in range(len(eligible) + 1):
        for movers in combinations(eligible, size):
            weight = 1.0
            for k in eligible:
                weight *= probs[k] if k in movers else 1.0 - probs[k]
            new_config = _moved(config, movers)
            outcomes[new_config] = outcomes.get(new_config, 0.0) + weight
    return outcomes


def kmc_jump_transition(config: Config, params: ModelParams) -> Distribution:
    """Exact one-event outcome distribution of the event-driven stepper
    (its embedded jump chain): car k moves with probability rate_k / total.
    Gridlocked configurations are absorbing."""
    eligible = eligible_cars(config)
    if not eligible:
        return {config: 1.0}
    rates = [hop_rate(config, k, params) for k in eligible]
    total = math.fsum(rates)
    outcomes: Distribution = {}
    for k, rate in zip(eligible, rates):
        new_config = _moved(config, (k,))
        outcomes[new_config] = outcomes.get(new_config, 0.0) + rate / total
    return outcomes


def propagate(dist: Distribution, params: ModelParams, steps: int,
              transition) -> Distribution:
    """Push a distribution through ``steps`` exact transitions."""
    for _ in range(steps):
        out: Distribution = {}
        for config, weight in dist.items():
            for new_config, p in transition(config, params).items():
                out[new_config] = out.get(new_config, 0.0) + weight * p
        dist = out
    return dist


def density_of(dist: Distribution) -> list[float]:
    """Per-cell occupation probability of a configuration distribution."""
    n = len(next(iter(dist)))
    return [math.fsum(w * c[k] for c, w in dist.items()) for k in range(n)]


def metropolis_density(config: Config, params: ModelParams,
                       steps: int) -> list[float]:
    """Exact per-cell density after ``steps`` fixed-stepper sweeps."""
    return density_of(propagate({config: 1.0}, params, steps,
                                metropolis_transition))


def kmc_event_density(config: Config, params: ModelParams,
                      events: int) -> list[float]:
    """Exact per-cell density after ``events`` event-driven moves."""
    return density_of(propagate({config: 1.0}, params, events,
                                kmc_jump_transition))


def pearson_reference(a, b) -> float:
    """Two-pass centered sample correlation with compensated sums."""
    n = len(a)
    if n != len(b):
        raise ValueError("samples must be paired")
    mean_a = math.fsum(a) / n
    mean_b = math.fsum(b) / n
    cov = math.fsum((x - mean_a) * (y - mean_b) for x, y in zip(a, b))
    var_a = math.fsum((x - mean_a) ** 2 for x in a)
    var_b = math.fsum((y - mean_b) ** 2 for y in b)
    if var_a == 0.0 or var_b == 0.0:
        return math.nan
    return cov / math.sqrt(var_a * var_b)


def density_rhs_reference(rho, variant: str, look: int, beta: float,
                          rate: float, d: float = 0.0) -> list[float]:
    """Cell-density time derivative, evaluated term by term in plain Python.

    ``variant``: 'exponential' (rate factor exp(-beta * window mean)),
    'product' (one factor 1 + rho*(e^{-beta/M} - 1) per window cell) or
    'empirical' (per-cell exponent beta/M * rho**d inside each factor).
    """
    n = len(rho)
    if look < 1:
        factors = [1.0] * n
    else:
        bprime = beta / look
        factors = []
        for k in range(n):
            window = [rho[(k + 1 + i) % n] for i in range(1, look + 1)]
            if variant == "exponential":
                factors.append(math.exp(-beta * math.fsum(window) / look))
            elif variant == "product":
                value = 1.0
                for r in window:
                    value *= 1.0 + r * (math.exp(-bprime) - 1.0)
                factors.append(value)
            elif variant == "empirical":
                value = 1.0
                for r in window:
                    value *= 1.0 + r * (math.exp(-bprime * r ** d) - 1.0)
                factors.append(value)
            else:
                raise ValueError(f"unknown variant {variant!r}")
    flux = [rate * rho[k] * (1.0 - rho[(k + 1) % n]) * factors[k]
            for k in range(n)]
    return [flux[(k - 1) % n] - flux[k] for k in range(n)]


def lwr_red_light_profile(x: float, t: float, free_speed: float,
                          block_start: float, block_end: float) -> float:
    """Classical local conservation-law solution (no slowdown, beta = 0) for
    the red-light initial profile: density 1 on [block_start, block_end].

    Valid while the backward edge of the fan has not reached the standing
    jump at ``block_start`` (t < (block_end - block_start) / free_speed).
    The flux is free_speed * rho * (1 - rho): the left edge of the block is a
    stationary jump, the right edge opens into a centered fan.
    """
    if not 0 <= t < (block_end - block_start) / free_speed:
        raise ValueError("profile only valid before the fan meets the jump")
    if x < block_start:
        return 0.0
    if x <= block_end - free_speed * t:
        return 1.0
    if x >= block_end + free_speed * t:
        return 0.0
    return 0.5 * (1.0 - (x - block_end) / (free_speed * t))
