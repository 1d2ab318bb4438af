"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --n 64 --repeat 5

Prints one row per kernel with the best time of each backend, the speed-up
and the maximum difference between the two results.
"""

import argparse
import math
import timeit

import numpy as np

from elmorrey import kernels
from elmorrey.grid import Grid3, fft, random_smooth
from elmorrey.spectral import plan_for


def _cases(n):
    g = Grid3(n, math.pi)
    rng = np.random.default_rng(0)
    u = np.ascontiguousarray(random_smooth(g, rng, 3, kmax=4))
    w = random_smooth(g, rng, 3, kmax=3)
    w[2] += 1.5
    v = np.ascontiguousarray(w / np.sqrt(np.einsum("i...,i...->...", w, w)))
    gv = np.ascontiguousarray(random_smooth(g, rng, 9, kmax=3).reshape((3, 3) + g.shape))
    f = np.ascontiguousarray(u[0])
    radii = np.linspace(0.3, 0.9 * math.pi, 12)
    plan = plan_for(g)
    sh = fft(kernels.stress_products(u, gv))
    unnormalised = np.ascontiguousarray(w)
    origin = (g.axis[0],) * 3
    return {
        "shell_sums": lambda b: kernels.shell_sums(f * f, origin, g.h, radii, backend=b),
        "fd4 (first)": lambda b: kernels.fd4(f, 0, g.h, 1, backend=b),
        "fd4 (second)": lambda b: kernels.fd4(f, 2, g.h, 2, backend=b),
        "renormalize": lambda b: kernels.renormalize(unnormalised.copy(), backend=b),
        "stress_products": lambda b: kernels.stress_products(u, gv, backend=b),
        "director_forcing": lambda b: kernels.director_forcing(u, v, gv, backend=b),
        "momentum_from_stress": lambda b: kernels.momentum_from_stress(sh, plan, backend=b),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    if a is None:
        return 0.0
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        kernels._pick("cython")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<22}{'python [ms]':>13}{'cython [ms]':>13}{'speed-up':>10}{'max diff':>11}")
    for name, fn in _cases(args.n).items():
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in ("python", "cython")}
        diff = _max_diff(fn("python"), fn("cython"))
        print(f"{name:<22}{1e3 * times['python']:>13.2f}{1e3 * times['cython']:>13.2f}"
              f"{times['python'] / times['cython']:>10.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
