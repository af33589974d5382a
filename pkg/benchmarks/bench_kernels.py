"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 3] [--horizon 400]

Each case runs one replication per backend on identical inputs, checks the
two delivery vectors are bit-identical, and prints wall time and speed-up.
"""
import argparse
import time
import warnings

import numpy as np

from delaylab.appdelay import SUB_MTU, SUPER_MTU, Scenario
from delaylab.distributions import Exponential, Uniform
from delaylab.mac import MacParams
from delaylab.sim import available_backends, estimate_capacity, run_dcf_simulation, run_rps_oracle


def scenarios():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield "table1 (4 nodes, sub-MTU)", Scenario.homogeneous(
            [10] * 4, Uniform(750, 1500), mtu_bytes=1500, capacity_pkts_per_s=70.0)
        yield "table5 (4 nodes, fragmented)", Scenario.homogeneous(
            [1.7] * 4, Uniform(1500, 4500), mtu_bytes=1500, capacity_pkts_per_s=68.9, regime=SUPER_MTU)
        yield "20 nodes, exp 1125 B", Scenario.homogeneous(
            [2.5] * 20, Exponential(1125), mtu_bytes=1500, capacity_pkts_per_s=69.2, regime=SUB_MTU)


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--horizon", type=float, default=400.0)
    args = ap.parse_args()
    if "cython" not in available_backends():
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")

    print(f"{'case':<44}{'packets':>9}{'cython s':>10}{'python s':>10}{'speed-up':>10}  identical")
    mac = MacParams()
    for label, sc in scenarios():
        for engine, fn in (("dcf", run_dcf_simulation), ("rps", run_rps_oracle)):
            def run(backend):
                return fn(sc, seed=1, replications=1, horizon=args.horizon, backend=backend)
            tc, rc = best_of(lambda: run("cython"), args.repeat)
            tp, rp = best_of(lambda: run("python"), args.repeat)
            same = np.array_equal(rc.runs[0].delivery, rp.runs[0].delivery, equal_nan=True)
            n = rc.runs[0].arrivals.size
            print(f"{engine + ': ' + label:<44}{n:>9}{tc:>10.3f}{tp:>10.3f}{tp / tc:>9.1f}x  {same}")
    for n in (4, 30):
        tc, cc = best_of(lambda: estimate_capacity(n, mac, seed=1, horizon=args.horizon,
                                                   backend="cython"), args.repeat)
        tp, cp = best_of(lambda: estimate_capacity(n, mac, seed=1, horizon=args.horizon,
                                                   backend="python"), args.repeat)
        print(f"{f'saturated: {n} nodes':<44}{cc.successes:>9}{tc:>10.3f}{tp:>10.3f}"
              f"{tp / tc:>9.1f}x  {cc == cp}")


if __name__ == "__main__":
    main()
