"""Throughput comparison of the compiled and pure-Python stepping kernels.

Both backends walk bit-identical trajectories, so this only measures speed.
Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --cells 700 --sweeps 5000
"""

import argparse
import time

import numpy as np

from lookahead_traffic.kernels import available_backends, get_backend
from lookahead_traffic.lattice import (ModelParams, hop_rate_table,
                                       move_probability_table, red_light_ic)
from lookahead_traffic.rng import RngStream


def time_best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(name, params, ic_cells, sweeps, horizon, repeat):
    backend = get_backend(name)
    move_prob = move_probability_table(params)
    rates = hop_rate_table(params)

    def metro():
        cells = ic_cells.copy()
        backend.metropolis_advance(cells, RngStream(7).state, move_prob,
                                   params.look_ahead, sweeps)

    def kmc():
        cells = ic_cells.copy()
        backend.kmc_advance(cells, RngStream(11).state, rates,
                            params.look_ahead, 0.0, horizon)

    metro_s = time_best(metro, repeat)
    kmc_s = time_best(kmc, repeat)
    return sweeps / metro_s, horizon / kmc_s


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cells", type=int, default=400)
    parser.add_argument("--sweeps", type=int, default=2000,
                        help="fixed-step sweeps per timing run")
    parser.add_argument("--horizon", type=float, default=20.0,
                        help="simulated seconds per event-driven timing run")
    parser.add_argument("--look-ahead", type=int, default=5)
    parser.add_argument("--beta", type=float, default=3.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    params = ModelParams(n_cells=args.cells, look_ahead=args.look_ahead,
                         beta=args.beta, hop_rate=4.3478)
    ic_cells = np.array(red_light_ic(args.cells).cells)

    print(f"ring of {args.cells} cells, look_ahead={args.look_ahead}, "
          f"beta={args.beta}; best of {args.repeat}")
    results = {}
    for name in available_backends():
        metro_rate, kmc_rate = bench_backend(name, params, ic_cells,
                                             args.sweeps, args.horizon, args.repeat)
        results[name] = (metro_rate, kmc_rate)
        print(f"  {name:9s} metropolis {metro_rate:12.0f} sweeps/s"
              f"   kmc {kmc_rate:10.1f} simulated s/s")
    if len(results) == 2:
        m = results["compiled"][0] / results["python"][0]
        k = results["compiled"][1] / results["python"][1]
        print(f"  speedup   metropolis {m:10.1f}x            kmc {k:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
