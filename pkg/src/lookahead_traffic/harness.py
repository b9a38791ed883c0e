"""Experiment orchestration: key=value configs, named presets, CSV output.

Configuration files are plain text, one ``key = value`` per line, ``#``
comments and blank lines ignored.  Every key has a default taken from the
reference experiment (700-cell ring, cars initially packed in cells 20-60,
c0 = 4.3478 /s, 22-ft cells, 5000 realizations), so an empty file is a valid
full-scale run.  Unknown keys and invalid values are rejected with the line
(or command-line option) they came from.

A preset bundles the scientific settings for one standard experiment; the
command line additionally substitutes small "desk-scale" grids so a full
preset finishes in seconds (``--paper-scale`` restores the reference sizes).

``run_experiment`` writes, per run, into the output directory:

  density.csv      time, cell, source, value     (one block per source)
  correlation.csv  time, cell, lag, r            (stochastic runs only)
  closure.csv      time, cell, exact, closure_a1a2, closure_nobeta
  a1.csv           time, cell, lhs, a1_rhs, product_rhs  (needs look_ahead>=1)
  manifest.json    the fully resolved configuration, master seed included

The manifest contains no timestamps or host details, so rerunning with the
same manifest reproduces every CSV byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import continuum, meso
from .ensemble import EnsembleConfig, EnsembleStats, factorization_diagnostic, run_ensemble
from .lattice import LatticeState, ModelParams, red_light_ic

SOURCES = ("stochastic", "meso_old", "meso_new", "meso_emp", "pde")

PRESET_NAMES = ("A1Check", "FrontTracking", "Correlations", "ClosureTest",
                "EmpiricalComparison", "PdeConsistency", "Custom")

# Scientific settings per preset (sizes stay at the reference values; the
# CLI layers _DESK_SCALE on top unless --paper-scale is given).
_RECIPES = {
    "A1Check": {"beta": "3", "look_ahead": "5", "sources": "stochastic"},
    "FrontTracking": {"beta": "3", "look_ahead": "5",
                      "sources": "stochastic,meso_old,meso_new"},
    "Correlations": {"beta": "3", "look_ahead": "1", "sources": "stochastic",
                     "lags": "1,2,3,4"},
    "ClosureTest": {"beta": "3", "look_ahead": "1", "sources": "stochastic"},
    "EmpiricalComparison": {"beta": "3", "look_ahead": "1",
                            "density_power": "2",
                            "sources": "stochastic,meso_new,meso_emp"},
    "PdeConsistency": {"beta": "3", "look_ahead": "5",
                       "sources": "meso_old,pde"},
    "Custom": {},
}

# Small grids for interactive use and CI.  Presets that track the moving
# front need 400 cells: the leading edge travels roughly c0*t cells past the
# initial block, which leaves a 200-cell ring before t = 60 s.
_DESK_SCALE = {
    "A1Check": {"n_cells": "200", "realizations": "1000"},
    "FrontTracking": {"n_cells": "400", "realizations": "500"},
    "Correlations": {"n_cells": "400", "realizations": "1000"},
    "ClosureTest": {"n_cells": "400", "realizations": "2000"},
    "EmpiricalComparison": {"n_cells": "400", "realizations": "2000"},
    "PdeConsistency": {"n_cells": "200", "realizations": "500"},
    "Custom": {"n_cells": "200", "realizations": "500"},
}

_DEFAULT_TIMES = ",".join(str(5 * i) for i in range(13))  # 0,5,...,60 s

_DEFAULTS = {
    "preset": "Custom",
    "n_cells": "700",
    "block_start": "20",
    "block_end": "60",
    "look_ahead": "5",
    "beta": "3",
    "c0": "4.3478",
    "dt": "",            # empty -> 0.1 / c0
    "cell_width": "22",
    "realizations": "5000",
    "seed": "20140901",
    "stepper": "metropolis",
    "record_times": _DEFAULT_TIMES,
    "lags": "1,2,3,4",
    "smoothing_window": "5",
    "density_power": "0",
    "dt_ode": "",        # empty -> 0.1 / c0
    "dx": "",            # empty -> cell_width
    "cfl": "0.8",
    "sources": "stochastic",
    "out_dir": "results",
}


class ConfigError(ValueError):
    """Invalid experiment configuration (bad key, value, or combination)."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved, validated experiment."""

    preset: str
    params: ModelParams
    block_start: int
    block_end: int
    ensemble: EnsembleConfig
    sources: tuple[str, ...]
    density_power: float
    dt_ode: float
    dx: float
    cfl: float
    out_dir: str
    resolved: dict  # plain-value mapping written to manifest.json


def _fail(where: str, key: str, message: str):
    prefix = f"{where}: " if where else ""
    raise ConfigError(f"{prefix}{key}: {message}")


def _get_int(entries, key, minimum=None):
    raw, where = entries[key]
    try:
        value = int(raw)
    except ValueError:
        _fail(where, key, f"expected an integer, got {raw!r}")
    if minimum is not None and value < minimum:
        _fail(where, key, f"must be >= {minimum} (got {value})")
    return value


def _get_float(entries, key, minimum=None, strict_min=None):
    raw, where = entries[key]
    try:
        value = float(raw)
    except ValueError:
        _fail(where, key, f"expected a number, got {raw!r}")
    if minimum is not None and value < minimum:
        _fail(where, key, f"must be >= {minimum} (got {value})")
    if strict_min is not None and value <= strict_min:
        _fail(where, key, f"must be > {strict_min} (got {value})")
    return value


def _get_choice(entries, key, choices):
    raw, where = entries[key]
    if raw not in choices:
        _fail(where, key, f"must be one of {', '.join(choices)} (got {raw!r})")
    return raw


def _get_list(entries, key, convert, label):
    raw, where = entries[key]
    items = [piece.strip() for piece in raw.split(",") if piece.strip()]
    if not items:
        _fail(where, key, "expected a comma-separated list")
    try:
        return [convert(piece) for piece in items]
    except ValueError:
        _fail(where, key, f"expected comma-separated {label}, got {raw!r}")


def parse_config(text: str, preset: str | None = None) -> ExperimentSpec:
    """Parse a ``key = value`` document into a validated ExperimentSpec.

    ``preset`` overrides any ``preset`` key in the document.  Defaults are the
    full-scale reference values; preset recipes fill in their scientific
    settings, and explicit keys always win.
    """
    entries: dict[str, tuple[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, f"line {lineno}")
    return resolve_spec(entries, preset=preset)


def resolve_spec(entries: dict[str, tuple[str, str]], preset: str | None = None,
                 desk_scale: bool = False) -> ExperimentSpec:
    """Layer defaults, preset recipe, and explicit entries, then validate.

    ``entries`` maps key -> (raw string, origin label); origin labels show up
    in error messages (``line 3`` / ``option --beta``).
    """
    for key in entries:
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
    if preset is None:
        preset = entries.get("preset", (_DEFAULTS["preset"], ""))[0]
    if preset not in PRESET_NAMES:
        raise ConfigError(
            f"preset: must be one of {', '.join(PRESET_NAMES)} (got {preset!r})")

    merged = {key: (value, "default") for key, value in _DEFAULTS.items()}
    merged["preset"] = (preset, "preset")
    for key, value in _RECIPES[preset].items():
        merged[key] = (value, f"preset {preset}")
    if desk_scale:
        for key, value in _DESK_SCALE[preset].items():
            merged[key] = (value, f"preset {preset} (desk scale)")
    for key, pair in entries.items():
        if key != "preset":
            merged[key] = pair

    n_cells = _get_int(merged, "n_cells", minimum=2)
    block_start = _get_int(merged, "block_start", minimum=1)
    block_end = _get_int(merged, "block_end", minimum=1)
    look_ahead = _get_int(merged, "look_ahead", minimum=0)
    beta = _get_float(merged, "beta", minimum=0.0)
    c0 = _get_float(merged, "c0", strict_min=0.0)
    cell_width = _get_float(merged, "cell_width", strict_min=0.0)
    realizations = _get_int(merged, "realizations", minimum=2)
    seed = _get_int(merged, "seed", minimum=0)
    stepper = _get_choice(merged, "stepper", ("metropolis", "kmc"))
    record_times = _get_list(merged, "record_times", float, "numbers")
    lags = _get_list(merged, "lags", int, "integers")
    smoothing_window = _get_int(merged, "smoothing_window", minimum=1)
    density_power = _get_float(merged, "density_power", minimum=0.0)
    cfl = _get_float(merged, "cfl", strict_min=0.0)
    sources = tuple(_get_list(merged, "sources", str, "source names"))
    out_dir = merged["out_dir"][0]

    dt = _get_float(merged, "dt", strict_min=0.0) if merged["dt"][0] else 0.1 / c0
    dt_ode = (_get_float(merged, "dt_ode", strict_min=0.0)
              if merged["dt_ode"][0] else 0.1 / c0)
    dx = _get_float(merged, "dx", strict_min=0.0) if merged["dx"][0] else cell_width

    where_dt = merged["dt"][1] if merged["dt"][0] else merged["c0"][1]
    if c0 * dt > 1.0:
        _fail(where_dt, "dt",
              f"c0 * dt = {c0 * dt:g} exceeds 1, the move-probability bound")
    if c0 * dt_ode > 0.5:
        _fail(merged["dt_ode"][1], "dt_ode",
              f"c0 * dt_ode = {c0 * dt_ode:g} exceeds the stability budget 0.5")
    if not cfl <= 0.9:
        _fail(merged["cfl"][1], "cfl", f"must be <= 0.9 (got {cfl:g})")
    if not block_start <= block_end <= n_cells:
        _fail(merged["block_end"][1], "block_end",
              f"need block_start <= block_end <= n_cells "
              f"(got {block_start}, {block_end}, {n_cells})")
    if look_ahead >= n_cells:
        _fail(merged["look_ahead"][1], "look_ahead",
              f"must be < n_cells (got {look_ahead} with n_cells={n_cells})")
    for name in sources:
        if name not in SOURCES:
            _fail(merged["sources"][1], "sources",
                  f"unknown source {name!r}; choose from {', '.join(SOURCES)}")
    if len(set(sources)) != len(sources):
        _fail(merged["sources"][1], "sources", "sources must not repeat")
    if "pde" in sources and beta > 0 and look_ahead < 1:
        _fail(merged["look_ahead"][1], "look_ahead",
              "the pde source needs look_ahead >= 1 when beta > 0 "
              "(its flux averages density over look_ahead * cell_width)")

    try:
        params = ModelParams(n_cells=n_cells, look_ahead=look_ahead, beta=beta,
                             hop_rate=c0, cell_width=cell_width, dt=dt)
        ensemble_cfg = EnsembleConfig(
            n_realizations=realizations,
            record_times=tuple(record_times),
            master_seed=seed,
            stepper=stepper,
            correlation_lags=tuple(lags),
            smoothing_window=smoothing_window,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    resolved = {
        "preset": preset,
        "n_cells": n_cells,
        "block_start": block_start,
        "block_end": block_end,
        "look_ahead": look_ahead,
        "beta": beta,
        "c0": c0,
        "dt": dt,
        "cell_width": cell_width,
        "realizations": realizations,
        "seed": seed,
        "stepper": stepper,
        "record_times": record_times,
        "lags": lags,
        "smoothing_window": smoothing_window,
        "density_power": density_power,
        "dt_ode": dt_ode,
        "dx": dx,
        "cfl": cfl,
        "sources": list(sources),
        "out_dir": out_dir,
    }
    return ExperimentSpec(
        preset=preset, params=params, block_start=block_start,
        block_end=block_end, ensemble=ensemble_cfg, sources=sources,
        density_power=density_power, dt_ode=dt_ode, dx=dx, cfl=cfl,
        out_dir=out_dir, resolved=resolved)


def preset_spec(name: str, overrides: dict[str, str] | None = None,
                paper_scale: bool = False) -> ExperimentSpec:
    """Resolve a named preset; ``overrides`` maps key -> raw value strings."""
    entries = {}
    for key, value in (overrides or {}).items():
        key = key.replace("-", "_")
        entries[key] = (str(value), f"option --{key}")
    return resolve_spec(entries, preset=name, desk_scale=not paper_scale)


def front_position(profile, threshold: float):
    """Rightmost downward crossing of ``threshold`` in a density profile.

    Returns the 1-based, linearly interpolated cell position, or None when
    the profile never crosses the threshold from above.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    values = np.asarray(profile, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("profile must be a 1-D array of length >= 2")
    for right in range(values.size - 1, 0, -1):
        a = values[right - 1]
        b = values[right]
        if a > threshold >= b:
            return float(right + (a - threshold) / (a - b))
    return None


def _format(value) -> str:
    """Full-precision, locale-free cell rendering; NaN becomes empty."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_format(v) for v in row] for row in rows)


def _meso_profiles(spec: ExperimentSpec, ic: LatticeState, variant, times):
    model = meso.MesoModel(variant, spec.params, density_power=spec.density_power)
    field = meso.DensityField(ic.cells.astype(np.float64), time=0.0)
    snaps = meso.integrate(field, model, t_end=times[-1], dt_ode=spec.dt_ode,
                           record_times=times)
    return np.stack([snap.rho for snap in snaps])


def _pde_profiles(spec: ExperimentSpec, ic: LatticeState, times):
    field = continuum.GridField(ic.cells.astype(np.float64), dx=spec.dx,
                                look_length=spec.params.look_ahead * spec.params.cell_width,
                                time=0.0)
    snaps = continuum.fv_run(field, free_speed=spec.params.free_speed,
                             beta=spec.params.beta,
                             density_power=spec.density_power,
                             record_times=times, cfl=spec.cfl)
    return np.stack([snap.rho_bar for snap in snaps])


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> dict[str, Path]:
    """Run every source in the spec and write the CSV artifacts.

    Returns a mapping from artifact name (``density``, ``correlation``,
    ``closure``, ``a1``, ``manifest``) to the written path.  Output is a pure
    function of the resolved spec: rerunning reproduces identical bytes.
    """
    out_dir = Path(spec.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out_dir}: {exc}") from exc

    ic = red_light_ic(spec.params.n_cells, spec.block_start, spec.block_end)
    stats: EnsembleStats | None = None
    if "stochastic" in spec.sources:
        stats = run_ensemble(spec.params, ic, spec.ensemble, workers=workers)
        times = [float(t) for t in stats.times]
    else:
        times = [float(t) for t in spec.ensemble.record_times]

    profiles: dict[str, np.ndarray] = {}
    for source in spec.sources:
        if source == "stochastic":
            profiles[source] = stats.mean_density
        elif source == "meso_old":
            profiles[source] = _meso_profiles(spec, ic, meso.MesoVariant.EXPONENTIAL, times)
        elif source == "meso_new":
            profiles[source] = _meso_profiles(spec, ic, meso.MesoVariant.PRODUCT, times)
        elif source == "meso_emp":
            profiles[source] = _meso_profiles(spec, ic, meso.MesoVariant.EMPIRICAL, times)
        elif source == "pde":
            profiles[source] = _pde_profiles(spec, ic, times)

    written: dict[str, Path] = {}

    rows = []
    for source in spec.sources:
        table = profiles[source]
        for t_idx, t in enumerate(times):
            for k in range(table.shape[1]):
                rows.append((t, k + 1, source, table[t_idx, k]))
    _write_csv(out_dir / "density.csv", ("time", "cell", "source", "value"), rows)
    written["density"] = out_dir / "density.csv"

    if stats is not None:
        rows = []
        for t_idx, t in enumerate(times):
            for lag_idx, lag in enumerate(stats.correlation_lags):
                for k in range(stats.n_cells):
                    rows.append((t, k + 1, lag, stats.correlations[t_idx, lag_idx, k]))
        _write_csv(out_dir / "correlation.csv", ("time", "cell", "lag", "r"), rows)
        written["correlation"] = out_dir / "correlation.csv"

        rows = []
        for t_idx, t in enumerate(times):
            for k in range(stats.n_cells):
                rows.append((t, k + 1,
                             stats.drift_exact[t_idx, k],
                             stats.drift_lookahead[t_idx, k],
                             stats.drift_free[t_idx, k]))
        _write_csv(out_dir / "closure.csv",
                   ("time", "cell", "exact", "closure_a1a2", "closure_nobeta"),
                   rows)
        written["closure"] = out_dir / "closure.csv"

        if spec.params.look_ahead >= 1:
            rows = []
            for t_idx, t in enumerate(times):
                lhs, mixed, product = factorization_diagnostic(stats, t_idx)
                for k in range(stats.n_cells):
                    rows.append((t, k + 1, lhs[k], mixed[k], product[k]))
            _write_csv(out_dir / "a1.csv",
                       ("time", "cell", "lhs", "a1_rhs", "product_rhs"), rows)
            written["a1"] = out_dir / "a1.csv"

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as handle:
        json.dump(spec.resolved, handle, indent=2, sort_keys=True)
        handle.write("\n")
    written["manifest"] = manifest_path
    return written
