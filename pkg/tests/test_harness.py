"""Config parsing, presets, CSV artifacts, and the command-line front-end."""

import csv
import json
import math
from collections import Counter

import numpy as np
import pytest

from lookahead_traffic import cli
from lookahead_traffic.harness import (ConfigError, front_position,
                                       parse_config, preset_spec,
                                       run_experiment)
from lookahead_traffic.lattice import red_light_ic

QUICK = {"n_cells": "40", "block_start": "5", "block_end": "15",
         "look_ahead": "1", "realizations": "12", "record_times": "0,0.5,1"}


def _quick_overrides(**extra):
    merged = dict(QUICK)
    merged.update({k: str(v) for k, v in extra.items()})
    return merged


# ---------------------------------------------------------------------------
# configuration


def test_empty_document_gives_reference_defaults():
    spec = parse_config("", preset="FrontTracking")
    assert spec.params.n_cells == 700
    assert spec.params.hop_rate == pytest.approx(4.3478)
    assert spec.params.dt == pytest.approx(0.1 / 4.3478)
    assert spec.params.cell_width == 22.0
    assert spec.params.look_ahead == 5
    assert spec.params.beta == 3.0
    assert spec.block_start == 20 and spec.block_end == 60
    assert spec.ensemble.n_realizations == 5000
    assert list(spec.ensemble.record_times) == [5.0 * i for i in range(13)]
    assert spec.sources == ("stochastic", "meso_old", "meso_new")


def test_comments_blanks_and_explicit_keys():
    text = """
    # a tiny run
    n_cells = 48        # short ring
    block_end = 40
    beta = 0.5
    realizations = 16
    stepper = kmc
    record_times = 0, 1, 2
    """
    spec = parse_config(text)
    assert spec.preset == "Custom"
    assert spec.params.n_cells == 48
    assert spec.params.beta == 0.5
    assert spec.ensemble.n_realizations == 16
    assert list(spec.ensemble.record_times) == [0.0, 1.0, 2.0]


@pytest.mark.parametrize("text,fragment", [
    ("beta = -1\n", "line 1: beta"),
    ("speed = 3\n", "unknown key 'speed'"),
    ("n_cells = 100\nn_cells = 50\n", "line 2: duplicate"),
    ("n_cells = many\n", "line 1: n_cells"),
    ("c0 = 2\ndt = 0.6\n", "move-probability bound"),
    ("what is this line\n", "line 1"),
    ("n_cells = 30\nblock_end = 60\n", "block_end"),
    ("sources = stochastic,warp\n", "unknown source 'warp'"),
    ("record_times = 2,1\n", "record_times"),
    ("stepper = euler\n", "stepper"),
    ("smoothing_window = 4\n", "smoothing_window"),
    ("cfl = 0.95\n", "cfl"),
])
def test_bad_configs_name_the_key_and_line(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_preset_must_be_known():
    with pytest.raises(ConfigError):
        parse_config("", preset="Gridlock")


def test_desk_scale_and_paper_scale_presets():
    desk = preset_spec("A1Check")
    assert desk.params.n_cells == 200
    assert desk.ensemble.n_realizations == 1000
    assert desk.params.beta == 3.0 and desk.params.look_ahead == 5
    paper = preset_spec("A1Check", paper_scale=True)
    assert paper.params.n_cells == 700
    assert paper.ensemble.n_realizations == 5000
    # explicit overrides beat both
    tuned = preset_spec("A1Check", {"look_ahead": "1", "beta": "0.5"})
    assert tuned.params.look_ahead == 1 and tuned.params.beta == 0.5


def test_override_errors_name_the_option():
    with pytest.raises(ConfigError) as err:
        preset_spec("Custom", {"beta": "-2"})
    assert "option --beta" in str(err.value)


def test_empirical_preset_carries_density_power():
    spec = preset_spec("EmpiricalComparison")
    assert spec.density_power == 2.0
    assert spec.sources == ("stochastic", "meso_new", "meso_emp")


# ---------------------------------------------------------------------------
# front position


def test_front_position_step_profile():
    profile = np.zeros(100)
    profile[:40] = 1.0  # cells 1..40 full, crossing between 40 and 41
    assert front_position(profile, 0.5) == pytest.approx(40.5)


def test_front_position_red_light_block():
    ic = red_light_ic(700, 20, 60)
    assert front_position(ic.cells, 0.5) == pytest.approx(60.5)


def test_front_position_interpolates_linearly():
    profile = np.array([0.9, 0.8, 0.6, 0.2, 0.05])
    # crossing 0.5 between cells 3 (0.6) and 4 (0.2): 3 + 0.1/0.4
    assert front_position(profile, 0.5) == pytest.approx(3.25)
    # rightmost crossing wins
    wiggly = np.array([0.9, 0.1, 0.9, 0.1, 0.0])
    assert front_position(wiggly, 0.5) == pytest.approx(3.5)


def test_front_position_undefined_cases():
    assert front_position(np.zeros(10), 0.5) is None
    assert front_position(np.full(10, 0.4), 0.5) is None
    with pytest.raises(ValueError):
        front_position(np.ones(10), 1.5)
    with pytest.raises(ValueError):
        front_position(np.array([1.0]), 0.5)


# ---------------------------------------------------------------------------
# artifacts


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    spec = preset_spec("FrontTracking",
                       _quick_overrides(out_dir=str(out), beta="1"))
    written = run_experiment(spec)
    return spec, written


def test_density_csv_schema(quick_run):
    spec, written = quick_run
    with open(written["density"], newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0].keys() == {"time", "cell", "source", "value"}
    seen = Counter((r["time"], r["cell"], r["source"]) for r in rows)
    assert max(seen.values()) == 1
    sources = {r["source"] for r in rows}
    assert sources == {"stochastic", "meso_old", "meso_new"}
    # the fixed stepper snaps record times to whole steps of dt = 0.1/c0
    dt = spec.params.dt
    want = [round(t / dt) * dt for t in (0.0, 0.5, 1.0)]
    times = sorted({float(r["time"]) for r in rows})
    assert times == pytest.approx(want, abs=1e-12)
    cells = {int(r["cell"]) for r in rows}
    assert min(cells) == 1 and max(cells) == spec.params.n_cells
    for r in rows:
        assert 0.0 <= float(r["value"]) <= 1.0


def test_initial_rows_reproduce_the_block(quick_run):
    spec, written = quick_run
    with open(written["density"], newline="") as handle:
        rows = [r for r in csv.DictReader(handle)
                if r["time"] == "0.0" and r["source"] == "stochastic"]
    values = {int(r["cell"]): float(r["value"]) for r in rows}
    for cell in range(1, 41):
        assert values[cell] == (1.0 if 5 <= cell <= 15 else 0.0)


def test_correlation_csv_blanks_undefined_values(quick_run):
    spec, written = quick_run
    with open(written["correlation"], newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0].keys() == {"time", "cell", "lag", "r"}
    t0 = [r for r in rows if r["time"] == "0.0"]
    assert t0 and all(r["r"] == "" for r in t0)  # IC is deterministic
    defined = [r for r in rows if r["r"] != ""]
    assert defined
    for r in defined:
        assert -1.0 - 1e-12 <= float(r["r"]) <= 1.0 + 1e-12


def test_closure_and_a1_schemas(quick_run):
    spec, written = quick_run
    with open(written["closure"], newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0].keys() == {"time", "cell", "exact", "closure_a1a2",
                              "closure_nobeta"}
    assert len(rows) == 3 * spec.params.n_cells
    with open(written["a1"], newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert rows[0].keys() == {"time", "cell", "lhs", "a1_rhs", "product_rhs"}
    # all three diagnostics are bounded by construction
    for r in rows:
        for col in ("lhs", "a1_rhs", "product_rhs"):
            assert 0.0 < float(r[col]) <= 1.0 + 1e-12


def test_manifest_is_complete_and_json(quick_run):
    spec, written = quick_run
    manifest = json.loads(written["manifest"].read_text())
    assert manifest["preset"] == "FrontTracking"
    assert manifest["n_cells"] == 40
    assert manifest["seed"] == spec.ensemble.master_seed
    assert manifest["sources"] == ["stochastic", "meso_old", "meso_new"]
    assert "time" not in manifest  # nothing host- or clock-dependent


def test_reruns_are_byte_identical(tmp_path):
    texts = {}
    for label in ("first", "second"):
        out = tmp_path / label
        spec = preset_spec("Correlations",
                           _quick_overrides(out_dir=str(out), beta="2"))
        written = run_experiment(spec)
        texts[label] = {name: path.read_bytes()
                        for name, path in written.items() if name != "manifest"}
    assert texts["first"] == texts["second"]


def test_pde_preset_runs_without_an_ensemble(tmp_path):
    spec = preset_spec("PdeConsistency",
                       _quick_overrides(out_dir=str(tmp_path / "pde"),
                                        look_ahead="2"))
    written = run_experiment(spec)
    assert set(written) == {"density", "manifest"}
    with open(written["density"], newline="") as handle:
        sources = {r["source"] for r in csv.DictReader(handle)}
    assert sources == {"meso_old", "pde"}


def test_kmc_stepper_through_the_harness(tmp_path):
    spec = preset_spec("Custom",
                       _quick_overrides(out_dir=str(tmp_path / "kmc"),
                                        stepper="kmc", realizations="8"))
    written = run_experiment(spec)
    with open(written["density"], newline="") as handle:
        rows = list(csv.DictReader(handle))
    times = sorted({float(r["time"]) for r in rows})
    assert times == [0.0, 0.5, 1.0]  # event-driven runs hit times exactly


# ---------------------------------------------------------------------------
# command line


def test_cli_run_and_exit_codes(tmp_path, capsys):
    config = tmp_path / "run.cfg"
    config.write_text("n_cells = 40\nblock_start = 5\nblock_end = 15\n"
                      "look_ahead = 1\nrealizations = 8\n"
                      "record_times = 0, 0.5\n"
                      f"out_dir = {tmp_path / 'out'}\n")
    assert cli.main(["run", str(config)]) == 0
    out = capsys.readouterr().out
    assert "density" in out and "manifest" in out
    assert (tmp_path / "out" / "density.csv").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    config = tmp_path / "bad.cfg"
    config.write_text("beta = -3\n")
    assert cli.main(["run", str(config)]) == 2
    assert "beta" in capsys.readouterr().err


def test_cli_missing_file(capsys):
    assert cli.main(["run", "/no/such/file.cfg"]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_cli_preset_with_overrides(tmp_path, capsys):
    argv = ["preset", "Custom", "--n_cells", "40", "--block_start", "5",
            "--block_end", "15", "--look-ahead", "1", "--realizations", "8",
            "--record_times", "0,0.5", "--output", str(tmp_path / "p")]
    assert cli.main(argv) == 0
    capsys.readouterr()
    assert (tmp_path / "p" / "density.csv").exists()


def test_cli_preset_rejects_unknown_key(tmp_path, capsys):
    argv = ["preset", "Custom", "--such_key", "1",
            "--output", str(tmp_path / "x")]
    assert cli.main(argv) == 2
    assert "such_key" in capsys.readouterr().err


def test_cli_preset_rejects_dangling_value(capsys):
    assert cli.main(["preset", "Custom", "--beta"]) == 2
    assert "missing a value" in capsys.readouterr().err


@pytest.mark.parametrize("name", cli.ORACLE_NAMES)
def test_cli_oracles_print_reference_values(name, capsys):
    assert cli.main(["oracle", name]) == 0
    out = capsys.readouterr().out
    assert out.strip()


def test_cli_oracle_pearson_value(capsys):
    cli.main(["oracle", "pearson"])
    out = capsys.readouterr().out
    assert "0.1666666666666" in out
