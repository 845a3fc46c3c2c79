"""Time the compiled and pure-Python kernels side by side.

    python3 benchmarks/bench_kernels.py [--trials 1000000] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from chainbell import _kernels
from chainbell.bounds import p_crit
from chainbell.experiment import _chain_tables
from chainbell.lhv import TWO_PI


def lhv_case(n, m):
    raw = np.random.Philox(key=1).random_raw(4 * m).reshape(m, 4)
    a_tab, b_tab = _chain_tables(n)
    args = (raw, 0, n, p_crit(n), 0.05, 1.0, 20.0 * n, TWO_PI, np.pi / (2 * n), False, a_tab, b_tab)
    return lambda backend: _kernels.lhv_block(*args, backend=backend)


def stream_case(m, dt=1.5):
    rng = np.random.default_rng(1)
    t0 = np.sort(rng.uniform(0, 4 * dt * m, m))
    a = np.sort(t0[rng.random(m) < 0.9])
    b = np.sort((t0 + rng.normal(0, dt / 2, m))[rng.random(m) < 0.9])
    return lambda backend: _kernels.match_stream(a, b, dt, backend=backend)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = sorted(_kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled extension not built; timing the fallback only")
    cases = [
        (f"lhv_block     n=3, {args.trials} trials", lhv_case(3, args.trials)),
        (f"match_stream  {args.trials // 5} events/side", stream_case(args.trials // 5)),
    ]
    print(f"{'kernel':<40}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases:
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends}
        speed = times["python"] / times["cython"] if "cython" in times else 1.0
        print(f"{name:<40}" + "".join(f"{times[b]:>11.3f}s" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
