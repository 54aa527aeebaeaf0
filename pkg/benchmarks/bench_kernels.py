"""Trial throughput of the compiled and vectorized simulation kernels.

    python benchmarks/bench_kernels.py [--trials 2e6] [--n 19]
"""

import argparse
import math
import time

from noisyfb import analysis, montecarlo
from noisyfb._backend import HAVE_NUMBA
from noisyfb.schemes import SystemParams


def plan(mode, n, trials, collect):
    rate, dsnr, pe = 4.0, 100.0, 1e-6
    sys_ = SystemParams.from_snr(analysis.snr_for_target_rate(rate, n, pe, dsnr), dsnr, n)
    sp = None if mode == "sk" else analysis.derive_scheme_params(sys_, pe)
    return montecarlo.TrialPlan(1, trials, sys_, sp, rate, mode, frozenset(collect))


def rate_of(p, backend, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        montecarlo.estimate(p, workers=1, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return p.trials / best


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--trials", type=lambda s: int(float(s)), default=2_000_000)
    ap.add_argument("--n", type=int, default=19)
    args = ap.parse_args()
    cases = [
        ("modulo", {"ser", "aliasing_per_round"}),
        ("modulo", {"ser", "ber", "aliasing_per_round", "power"}),
        ("both", {"ser", "aliasing_per_round"}),
        ("coupled", {"ser", "moments"}),
        ("sk", {"ser"}),
    ]
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    if HAVE_NUMBA:  # compile outside the timed region
        for mode, col in cases:
            montecarlo.estimate(plan(mode, args.n, 1000, col), backend="numba")
    print(f"N={args.n}, single worker, trials/s (best of 3)")
    print(f"{'mode':<8} {'collect':<36} " + " ".join(f"{b:>12}" for b in backends) + "  speedup")
    for mode, col in cases:
        res = {}
        for b in backends:
            n_trials = args.trials if b == "numba" else max(args.trials // 10, 1000)
            res[b] = rate_of(plan(mode, args.n, n_trials, col), b)
        sp = f"{res['numba'] / res['numpy']:7.1f}x" if len(res) == 2 else ""
        print(f"{mode:<8} {','.join(sorted(col)):<36} "
              + " ".join(f"{res[b]:12.3g}" for b in backends) + "  " + sp)


if __name__ == "__main__":
    main()
