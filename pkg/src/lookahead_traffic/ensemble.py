"""Monte-Carlo ensembles and the per-cell statistics built from them.

A run launches ``n_realizations`` independent copies of the lattice, each
seeded deterministically from (master_seed, realization index), records the
configuration at the requested times and accumulates *integer* counts:
occupancies, occupancy pairs for each correlation lag, and histograms of the
look-ahead window count — overall and restricted to cars that are free to
move.  All reported statistics (mean density, correlations, the exact
drift of the density, the closed-form approximations evaluated on the mean
field, and the factorization diagnostics) are pure functions of those counts,
so results are bit-identical no matter how realizations are scheduled or how
many workers run them.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels, meso
from .lattice import LatticeState, ModelParams, car_count, hop_rate_table, \
    move_probability_table
from .rng import RngStream, derive_seed


class Stepper(Enum):
    METROPOLIS = "metropolis"
    KMC = "kmc"


@dataclass(frozen=True)
class EnsembleConfig:
    """What to run and what to record.

    record_times must be non-negative and strictly increasing.  With the
    fixed stepper each requested time is snapped to the nearest whole number
    of steps; the snapped times are what the statistics report.
    """

    n_realizations: int
    record_times: tuple[float, ...]
    master_seed: int
    stepper: Stepper = Stepper.METROPOLIS
    correlation_lags: tuple[int, ...] = (1, 2, 3, 4)
    smoothing_window: int = 5

    def __post_init__(self):
        if self.n_realizations < 2:
            raise ValueError("n_realizations must be >= 2")
        times = tuple(float(t) for t in self.record_times)
        if not times:
            raise ValueError("record_times must not be empty")
        if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("record_times must be non-negative and strictly increasing")
        object.__setattr__(self, "record_times", times)
        lags = tuple(int(l) for l in self.correlation_lags)
        if any(l < 1 for l in lags):
            raise ValueError("correlation lags must be >= 1")
        object.__setattr__(self, "correlation_lags", lags)
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be a positive odd integer")
        if isinstance(self.stepper, str):
            object.__setattr__(self, "stepper", Stepper(self.stepper))


@dataclass(frozen=True)
class EnsembleStats:
    """Per-(time, cell) ensemble statistics.

    Arrays are indexed [time, cell] (correlations [time, lag, cell]); cell i
    is 1-based position i+1.  Correlations that are undefined because a cell
    is deterministic in the sample are NaN, and are written as empty CSV
    fields downstream — never as zeros.
    """

    times: np.ndarray
    mean_density: np.ndarray
    std_density: np.ndarray
    correlation_lags: tuple[int, ...]
    correlations: np.ndarray
    exp_potential_mean: np.ndarray     # sample mean of exp(-beta * window fraction)
    exp_potential_mixed: np.ndarray    # exp(-beta * mean window fraction)
    exp_potential_product: np.ndarray  # product formula evaluated at mean density
    drift_exact: np.ndarray            # exact expected d(rho)/dt from the samples
    drift_lookahead: np.ndarray        # product closure evaluated at mean density
    drift_free: np.ndarray             # closure with the slowdown dropped
    n_realizations: int
    car_total: int
    params: ModelParams
    stepper: Stepper

    @property
    def n_cells(self) -> int:
        return self.params.n_cells


def density_estimate(samples: np.ndarray) -> np.ndarray:
    """Mean occupancy per cell over realization snapshots (axis 0)."""
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValueError("samples must be a (n_realizations, n_cells) array")
    return samples.mean(axis=0)


def pearson_correlation(a, b) -> float:
    """Centered sample correlation of two paired samples.

    Returns NaN when either sample has zero variance (the correlation is
    undefined, which downstream output renders as a missing value).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be paired 1-D arrays")
    if a.size < 2:
        raise ValueError("need at least two paired samples")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sum(da * da) * np.sum(db * db)
    if denom == 0.0:
        return math.nan
    return float(np.sum(da * db) / math.sqrt(denom))


def cell_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average over ``window`` cells, wrapping at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    values = np.asarray(values, dtype=np.float64)
    half = window // 2
    out = np.zeros_like(values)
    for shift in range(-half, half + 1):
        out += np.roll(values, shift, axis=-1)
    return out / window


def closure_rhs_exact(samples: np.ndarray, params: ModelParams) -> np.ndarray:
    """Exact expected density drift estimated from realization snapshots.

    Sample mean of rate(k-1)*occ(k-1)*(1-occ(k)) - rate(k)*occ(k)*(1-occ(k+1))
    where rate(k) is the slowed hop rate of the car at k — no factorization
    assumptions, just the empirical average of the microscopic drift.
    """
    samples = np.asarray(samples, dtype=np.uint8)
    if samples.ndim != 2:
        raise ValueError("samples must be a (n_realizations, n_cells) array")
    table = hop_rate_table(params)
    counts = np.zeros(samples.shape, dtype=np.int64)
    for offset in range(2, params.look_ahead + 2):
        counts += np.roll(samples, -offset, axis=1)
    moving = (samples == 1) & (np.roll(samples, -1, axis=1) == 0)
    outflow = np.where(moving, table[counts], 0.0)
    drift = np.roll(outflow, 1, axis=1) - outflow
    return drift.mean(axis=0)


def closure_rhs_lookahead(mean_density: np.ndarray, params: ModelParams) -> np.ndarray:
    """Product closure evaluated on a mean-density profile (shared with the
    mesoscopic model, which integrates exactly this right-hand side)."""
    return meso.product_rhs_array(np.asarray(mean_density, dtype=np.float64), params)


def closure_rhs_free(mean_density: np.ndarray, params: ModelParams) -> np.ndarray:
    """Same closure with the look-ahead factor dropped (slowdown ignored)."""
    rho = np.asarray(mean_density, dtype=np.float64)
    flux = params.hop_rate * rho * (1.0 - np.roll(rho, -1))
    return np.roll(flux, 1) - flux


def factorization_diagnostic(stats: EnsembleStats, time_index: int):
    """The three curves of the factorization check at one recorded time:
    sample mean of the rate factor, the same factor evaluated at the mean
    window fraction, and the product formula at the mean density.

    The first and third agree to rounding error (an identity on 0/1 cells);
    the middle one drifts away as the slowdown strengthens, which is what
    rules out closing the hierarchy by averaging inside the exponential.
    """
    if stats.params.look_ahead < 1:
        raise ValueError("diagnostic needs look_ahead >= 1")
    return (stats.exp_potential_mean[time_index],
            stats.exp_potential_mixed[time_index],
            stats.exp_potential_product[time_index])


# ---------------------------------------------------------------------------
# accumulation


def _metropolis_schedule(record_times, dt):
    """Map requested times to whole step counts (nearest; ties round half-even)."""
    steps = [round(t / dt) for t in record_times]
    for a, b in zip(steps, steps[1:]):
        if b <= a:
            raise ValueError(
                "record_times closer than the stepper resolution dt = %g" % dt)
    return steps


def _new_counts(n_times, n_cells, n_lags, n_bins):
    return {
        "occupancy": np.zeros((n_times, n_cells), dtype=np.int64),
        "pairs": np.zeros((n_times, n_lags, n_cells), dtype=np.int64),
        "window": np.zeros((n_times, n_cells, n_bins), dtype=np.int64),
        "moves": np.zeros((n_times, n_cells, n_bins), dtype=np.int64),
    }


def _accumulate(counts, t_idx, cells, look, lags, cell_range):
    counts["occupancy"][t_idx] += cells
    for j, lag in enumerate(lags):
        counts["pairs"][t_idx, j] += cells * np.roll(cells, -lag)
    window = kernels.lookahead_counts(cells, look)
    counts["window"][t_idx][cell_range, window] += 1
    movable = np.nonzero((cells == 1) & (np.roll(cells, -1) == 0))[0]
    counts["moves"][t_idx][movable, window[movable]] += 1


def _run_chunk(params: ModelParams, ic_cells: np.ndarray, cfg: EnsembleConfig,
               first: int, last: int):
    """Counts contributed by realizations ``first..last-1`` (exclusive)."""
    look = params.look_ahead
    lags = cfg.correlation_lags
    n = params.n_cells
    counts = _new_counts(len(cfg.record_times), n, len(lags), look + 1)
    cell_range = np.arange(n)
    if cfg.stepper is Stepper.METROPOLIS:
        table = move_probability_table(params)
        schedule = _metropolis_schedule(cfg.record_times, params.dt)
    else:
        table = hop_rate_table(params)
    for realization in range(first, last):
        rng = RngStream(derive_seed(cfg.master_seed, realization))
        cells = ic_cells.copy()
        if cfg.stepper is Stepper.METROPOLIS:
            done = 0
            for t_idx, target in enumerate(schedule):
                kernels.metropolis_advance(cells, rng.state, table, look,
                                           target - done)
                done = target
                _accumulate(counts, t_idx, cells, look, lags, cell_range)
        else:
            now = 0.0
            for t_idx, target in enumerate(cfg.record_times):
                kernels.kmc_advance(cells, rng.state, table, look, now, target)
                now = target
                _accumulate(counts, t_idx, cells, look, lags, cell_range)
    return counts


def _chunk_star(args):
    return _run_chunk(*args)


def run_ensemble(params: ModelParams, ic: LatticeState, cfg: EnsembleConfig,
                 workers: int = 1) -> EnsembleStats:
    """Run the ensemble and reduce it to :class:`EnsembleStats`.

    ``workers > 1`` farms contiguous realization ranges out to processes; the
    reduction sums integer counts, so the result is identical for any worker
    count.
    """
    if ic.n_cells != params.n_cells:
        raise ValueError("initial condition does not match params.n_cells")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n = cfg.n_realizations
    ic_cells = np.array(ic.cells)
    if workers == 1 or n < 4 * workers:
        counts = _run_chunk(params, ic_cells, cfg, 0, n)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        jobs = [(params, ic_cells, cfg, int(a), int(b))
                for a, b in zip(bounds, bounds[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_chunk_star, jobs))
        counts = partials[0]
        for part in partials[1:]:
            for key in counts:
                counts[key] += part[key]

    if cfg.stepper is Stepper.METROPOLIS:
        times = np.array([s * params.dt for s in
                          _metropolis_schedule(cfg.record_times, params.dt)])
    else:
        times = np.array(cfg.record_times, dtype=np.float64)
    return _finalize(counts, times, params, cfg)


def _finalize(counts, times, params: ModelParams, cfg: EnsembleConfig) -> EnsembleStats:
    """Turn integer counts into the reported statistics."""
    n = cfg.n_realizations
    look = params.look_ahead
    occupancy = counts["occupancy"]            # (T, N) ints
    mean_density = occupancy / n
    # occupancies are 0/1 so sum of squares == sum
    var = (occupancy - occupancy.astype(np.float64) ** 2 / n) / (n - 1)
    std_density = np.sqrt(np.maximum(var, 0.0))

    correlations = np.empty(counts["pairs"].shape, dtype=np.float64)
    for j, lag in enumerate(cfg.correlation_lags):
        sum_a = occupancy
        sum_b = np.roll(occupancy, -lag, axis=1)
        numer = (n * counts["pairs"][:, j] - sum_a * sum_b).astype(np.float64)
        var_a = (n * sum_a - sum_a * sum_a).astype(np.float64)
        var_b = (n * sum_b - sum_b * sum_b).astype(np.float64)
        denom = var_a * var_b
        with np.errstate(invalid="ignore", divide="ignore"):
            correlations[:, j] = np.where(denom > 0.0,
                                          numer / np.sqrt(denom), np.nan)

    weights = hop_rate_table(params) / params.hop_rate   # exp(-beta * c / M)
    exp_potential_mean = counts["window"] @ weights / n
    mean_window = counts["window"] @ np.arange(look + 1, dtype=np.float64)
    mean_window /= n * max(look, 1)
    exp_potential_mixed = np.exp(-params.beta * mean_window)
    exp_potential_product = np.empty_like(mean_density)
    for t in range(len(times)):
        exp_potential_product[t] = meso.window_rate_factor(mean_density[t], params)

    outflow = counts["moves"] @ hop_rate_table(params) / n
    drift_exact = np.roll(outflow, 1, axis=1) - outflow
    drift_lookahead = np.empty_like(mean_density)
    drift_free = np.empty_like(mean_density)
    for t in range(len(times)):
        drift_lookahead[t] = closure_rhs_lookahead(mean_density[t], params)
        drift_free[t] = closure_rhs_free(mean_density[t], params)

    return EnsembleStats(
        times=times,
        mean_density=mean_density,
        std_density=std_density,
        correlation_lags=cfg.correlation_lags,
        correlations=correlations,
        exp_potential_mean=exp_potential_mean,
        exp_potential_mixed=exp_potential_mixed,
        exp_potential_product=exp_potential_product,
        drift_exact=drift_exact,
        drift_lookahead=drift_lookahead,
        drift_free=drift_free,
        n_realizations=n,
        car_total=int(counts["occupancy"][0].sum() // n),
        params=params,
        stepper=cfg.stepper,
    )
