"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--events 2000 4000] [--repeat 5]

Prints one JSON line per (kernel, size) with best-of-repeat wall times.
"""

import argparse
import json
import math
import timeit

import numpy as np

from hawkesgc import _backend, _fallback

try:
    from hawkesgc import _kernels
except ImportError:
    _kernels = None


def features_case(n, U=5, M=8, seed=0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0, n / 2.0, n))
    types = rng.integers(0, U, n).astype(np.int64)
    return (times, types, U, np.linspace(0, 20, M), 1.5)


def intensity_case(n, U=5, seed=0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0, n / 2.0, n))
    types = rng.integers(0, U, n).astype(np.int64)
    b = rng.uniform(0, 0.05, (U, U))
    w = rng.uniform(0.5, 2.0, (U, U)) * math.pi
    ph = np.zeros((U, U))
    end = 2 * math.pi / w
    return (float(times[-1]) + 0.1, times, types, b, w, ph, end, False, np.zeros(U))


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, nargs="+", default=[1000, 4000, 16000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print(json.dumps({"error": "compiled kernels not built; run pip install -e ."}))
        return 1
    for n in args.events:
        for name, case in (("excitation_features", features_case(n)),
                           ("sine_intensity", intensity_case(n))):
            fast = best_time(getattr(_kernels, name), case, args.repeat)
            slow = best_time(getattr(_fallback, name), case, args.repeat)
            print(json.dumps({"kernel": name, "events": n, "cython_s": round(fast, 6),
                              "python_s": round(slow, 6), "speedup": round(slow / fast, 2),
                              "active_backend": _backend.BACKEND}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
