"""Compare the numba and numpy kernel backends on desk-scale inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and backend, the speedup, and the
largest absolute disagreement between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from spillsense import _kernels
from spillsense.simulate import generate_network


def _best(fn, args, repeat):
    fn(*args)  # warm-up (triggers JIT compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(seed=0):
    rng = np.random.default_rng(seed)
    net = generate_network("erdos_renyi", 2000, seed, p=0.01)
    width = int(net.degrees.max()) + 1
    x = rng.normal(size=1_000_000)
    keys = rng.integers(0, 500, size=x.shape[0])
    probs = rng.uniform(0.05, 0.95, net.unit_count)
    treat = (rng.random((200, net.unit_count)) < 0.3).astype(np.int64)
    return [
        ("compensated_sum (1e6)", "compensated_sum", (x,)),
        ("group_sum (1e6, 500 groups)", "group_compensated_sum", (keys, x, 500)),
        ("poisson_binomial (n=400)", "poisson_binomial", (rng.uniform(size=400),)),
        ("batch_poisson_binomial (ER 2000)", "batch_poisson_binomial",
         (net.indptr, net.indices, probs, width)),
        ("neighbor_counts (200 x 2000)", "neighbor_counts", (net.indptr, net.indices, treat)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _kernels.numba_available():
        print("numba is unavailable; only the numpy backend can be timed")
    backends = {"numpy": _kernels.get_backend("numpy")}
    if _kernels.numba_available():
        backends["numba"] = _kernels.get_backend("numba")
    print(f"{'kernel':<36}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max |diff|':>12}")
    for label, name, kargs in cases():
        t_np, out_np = _best(getattr(backends["numpy"], name), kargs, args.repeat)
        if "numba" in backends:
            t_nb, out_nb = _best(getattr(backends["numba"], name), kargs, args.repeat)
            diff = float(np.max(np.abs(np.asarray(out_np, dtype=float) - np.asarray(out_nb, dtype=float))))
            print(f"{label:<36}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}{diff:>12.2e}")
        else:
            print(f"{label:<36}{t_np * 1e3:>12.3f}{'-':>12}{'-':>9}{'-':>12}")


if __name__ == "__main__":
    main()
