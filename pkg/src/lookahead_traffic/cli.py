"""Command-line entry point.

    lookahead-traffic run <config-file> [--output DIR] [--workers N]
    lookahead-traffic preset <name> [--paper-scale] [--key value ...]
    lookahead-traffic oracle <name>

``run`` executes a key=value config file (see harness module docstring for
the format and defaults).  ``preset`` runs a named standard experiment at
desk scale, accepting any config key as a ``--key value`` override.
``oracle`` prints brute-force reference values (exact enumerations and hand
formulas) used to cross-check the fast implementations.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from . import oracles
from .harness import ConfigError, PRESET_NAMES, parse_config, preset_spec, run_experiment
from .lattice import ModelParams

ORACLE_NAMES = ("metropolis-step", "kmc-step", "pearson", "closure-hand",
                "lwr-profile")


def _print_density(label, values):
    print(label)
    for k, value in enumerate(values, start=1):
        print(f"  cell {k}: {value!r}")


def _oracle_metropolis_step():
    """One exact Metropolis step on a 4-ring, alternating cars, c0*dt = 0.5."""
    params = ModelParams(n_cells=4, look_ahead=1, beta=1.0, hop_rate=1.0, dt=0.5)
    config = (1, 0, 1, 0)
    print("4-cell ring, cars at 1 and 3, look_ahead=1, beta=1, c0*dt=0.5")
    _print_density("expected occupancy after one fixed-step update:",
                   oracles.metropolis_density(config, params, steps=1))


def _oracle_kmc_step():
    """Event probabilities and two-event densities on a 6-ring."""
    params = ModelParams(n_cells=6, look_ahead=1, beta=1.0, hop_rate=1.0)
    config = (1, 0, 0, 1, 1, 0)
    dist = oracles.kmc_jump_transition(config, params)
    print("6-cell ring, cars at 1, 4, 5, look_ahead=1, beta=1")
    print("one-event outcome probabilities:")
    for outcome, weight in sorted(dist.items()):
        print(f"  {list(outcome)}: {weight!r}")
    _print_density("expected occupancy after two events:",
                   oracles.kmc_event_density(config, params, events=2))


def _oracle_pearson():
    a = (1, 0, 1, 0, 1)
    b = (1, 1, 0, 0, 1)
    print(f"pearson correlation of {a} and {b}:")
    print(f"  r = {oracles.pearson_reference(a, b)!r}  (exactly 1/6)")


def _oracle_closure_hand():
    """Hand evaluation of the three closed drift formulas on four cells."""
    rho = (0.2, 0.5, 0.8, 0.1)
    print(f"rho = {rho}, look_ahead=1, beta=3, c0=1, density_power=2")
    for variant in ("exponential", "product", "empirical"):
        values = oracles.density_rhs_reference(rho, variant, look=1, beta=3.0,
                                               rate=1.0, d=2.0)
        print(f"  {variant:12s}: {values!r}")


def _oracle_lwr_profile():
    """Classical kinematic-wave solution for the released car block."""
    free_speed = 4.3478 * 22.0
    # valid until the fan reaches the stationary upstream jump at ~9.2 s
    print("kinematic-wave density at t = 5 s, cells 1..120 step 10 "
          "(block 20-60, 22-ft cells):")
    for cell in range(10, 121, 10):
        x = (cell - 0.5) * 22.0
        rho = oracles.lwr_red_light_profile(x, 5.0, free_speed,
                                            block_start=19 * 22.0,
                                            block_end=60 * 22.0)
        print(f"  cell {cell}: {rho!r}")


_ORACLES = {
    "metropolis-step": _oracle_metropolis_step,
    "kmc-step": _oracle_kmc_step,
    "pearson": _oracle_pearson,
    "closure-hand": _oracle_closure_hand,
    "lwr-profile": _oracle_lwr_profile,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lookahead-traffic",
        description="Stochastic look-ahead traffic model and its deterministic limits.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a key=value config file")
    run_p.add_argument("config", help="path to the configuration file")
    run_p.add_argument("--output", help="override the out_dir key")
    run_p.add_argument("--workers", type=int, default=1,
                       help="worker processes for the stochastic ensemble")

    preset_p = sub.add_parser(
        "preset", help="run a named experiment at desk scale",
        epilog="Any config key can be overridden as --key value, "
               "e.g. --beta 0.5 --realizations 200.")
    preset_p.add_argument("name", choices=PRESET_NAMES)
    preset_p.add_argument("--paper-scale", action="store_true",
                          help="use the full-scale reference sizes")
    preset_p.add_argument("--output", help="override the out_dir key")
    preset_p.add_argument("--workers", type=int, default=1,
                          help="worker processes for the stochastic ensemble")

    oracle_p = sub.add_parser("oracle",
                              help="print brute-force reference values")
    oracle_p.add_argument("name", choices=ORACLE_NAMES)
    return parser


def _collect_overrides(extras: list[str]) -> dict[str, str]:
    """Turn leftover ``--key value`` pairs into an override mapping."""
    overrides: dict[str, str] = {}
    index = 0
    while index < len(extras):
        token = extras[index]
        if not token.startswith("--") or len(token) <= 2:
            raise ConfigError(f"expected --key value pairs, got {token!r}")
        key = token[2:]
        if "=" in key:
            key, _, value = key.partition("=")
        else:
            index += 1
            if index >= len(extras):
                raise ConfigError(f"option --{key} is missing a value")
            value = extras[index]
        overrides[key.replace("-", "_")] = value
        index += 1
    return overrides


def main(argv=None) -> int:
    parser = _build_parser()
    args, extras = parser.parse_known_args(argv)
    try:
        if args.command == "run":
            if extras:
                parser.error(f"unrecognized arguments: {' '.join(extras)}")
            try:
                with open(args.config, "r", encoding="utf-8") as handle:
                    text = handle.read()
            except OSError as exc:
                print(f"error: cannot read config {args.config}: {exc}",
                      file=sys.stderr)
                return 2
            spec = parse_config(text)
            if args.output:
                resolved = dict(spec.resolved)
                resolved["out_dir"] = args.output
                spec = dataclasses.replace(spec, out_dir=args.output,
                                           resolved=resolved)
            written = run_experiment(spec, workers=args.workers)
        elif args.command == "preset":
            overrides = _collect_overrides(extras)
            if args.output:
                overrides["out_dir"] = args.output
            spec = preset_spec(args.name, overrides,
                               paper_scale=args.paper_scale)
            written = run_experiment(spec, workers=args.workers)
        else:
            _ORACLES[args.name]()
            return 0
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name in sorted(written):
        print(f"{name}: {written[name]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
