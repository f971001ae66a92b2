"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is checked
for agreement between backends before it is timed.
"""
import argparse
import timeit

import numpy as np

from boundsol.kernels import _pykernels

try:
    from boundsol.kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(n1: int, n2: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    lower, upper = rng.uniform(-1, 0, n1), rng.uniform(-1, 0, n1)
    diag = 2.5 + rng.uniform(0, 1, n1)
    rhs = rng.standard_normal(n1)
    u1 = rng.standard_normal((2, n1))
    u2 = rng.standard_normal((n2, n2))
    return {
        f"thomas n={n1}": ("thomas", (lower, diag, upper, rhs)),
        f"second_difference 2x{n1}": ("second_difference", (u1, 0.01)),
        f"laplacian5 {n2}x{n2}": ("laplacian5", (u2, 0.05)),
    }


def best_of(fn, args, repeat: int) -> float:
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n1", type=int, default=6399, help="1-D interior size (L=32, h=0.01)")
    ap.add_argument("--n2", type=int, default=639, help="2-D interior side (L=16, h=0.05)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, (name, a) in cases(args.n1, args.n2).items():
        py = getattr(_pykernels, name)
        tp = best_of(py, a, args.repeat)
        if _ckernels is None:
            print(f"{label:28s} {tp * 1e3:12.4f} {'-':>12s} {'-':>8s}")
            continue
        cy = getattr(_ckernels, name)
        np.testing.assert_allclose(cy(*a), py(*a), rtol=1e-12, atol=1e-12)
        tc = best_of(cy, a, args.repeat)
        print(f"{label:28s} {tp * 1e3:12.4f} {tc * 1e3:12.4f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
