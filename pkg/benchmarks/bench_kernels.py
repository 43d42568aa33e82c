"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends must agree on every count; the script checks that too.
"""
import argparse
import math
import time

import numpy as np

from sann.kernels import backends
from sann.seeding import make_rng
from sann.spherical_lsh import pair_mix, triangle_mix

T = 100 ** 0.25


def _pair(mod):
    return mod.pair_trials(make_rng(1), pair_mix(1.0), T, 20_000)


def _triple(mod):
    s2 = math.sqrt(2)
    return mod.triple_trials(make_rng(2), triangle_mix(1.0, s2, s2), T, 200, 1 << 40)


def _capture(mod):
    rng = make_rng(3)
    dirs = rng.standard_normal((4096, 100))
    pts = rng.standard_normal((2000, 100))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    out = np.full(2000, -1, dtype=np.int64)
    left = mod.first_capture(dirs, pts, T, out, 0)
    return left, int(out.sum())


CASES = {"pair_trials": _pair, "triple_trials": _triple, "first_capture": _capture}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = backends()
    print(f"{'kernel':<15}" + "".join(f"{name:>14}" for name in mods) + f"{'speedup':>10}")
    for case, fn in CASES.items():
        times, results = {}, {}
        for name, mod in mods.items():
            best = math.inf
            for _ in range(args.repeat):
                t = time.perf_counter()
                results[name] = fn(mod)
                best = min(best, time.perf_counter() - t)
            times[name] = best
        if len(set(map(tuple, map(np.atleast_1d, results.values())))) != 1:
            raise SystemExit(f"{case}: backends disagree {results}")
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{case:<15}" + "".join(f"{times[n]:>13.3f}s" for n in mods) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
