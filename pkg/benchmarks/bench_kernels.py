"""Time the compiled and pure-Python sweep kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both kernels consume the same pre-drawn order and uniforms, so the check that
they leave identical partitions doubles as a parity test.
"""
import argparse
import time

import numpy as np

from gnbp import _backend, _kernels_py
from gnbp.io import load_galaxy


def prior_case(m, seed):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 8, size=m).astype(np.int64)
    _, z = np.unique(z, return_inverse=True)
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[: z.max() + 1] = np.bincount(z)
    order = rng.permutation(m).astype(np.int64)
    u = rng.random(m)
    return z.astype(np.int64), counts, int(z.max()) + 1, order, u, 0.5, 1.7


def gauss_case(x, seed):
    rng = np.random.default_rng(seed)
    m = x.shape[0]
    z = rng.integers(0, 10, size=m)
    _, z = np.unique(z, return_inverse=True)
    l = int(z.max()) + 1
    counts = np.zeros(m + 1, dtype=np.int64)
    counts[:l] = np.bincount(z)
    sums = np.zeros((m + 1, x.shape[1]))
    np.add.at(sums, z, x)
    order = rng.permutation(m).astype(np.int64)
    u = rng.random(m)
    phi = 1.0 / x.var()
    return x, z.astype(np.int64), counts, sums, l, order, u, 0.3, 1.2, phi, phi, x.mean(axis=0)


def copy_args(args):
    return [a.copy() if isinstance(a, np.ndarray) else a for a in args]


def timed(fn, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        fresh = copy_args(args)
        start = time.perf_counter()
        l = fn(*fresh)
        best = min(best, time.perf_counter() - start)
        out = (l, fresh)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    opts = ap.parse_args(argv)
    compiled = _backend.compiled()
    galaxy = np.ascontiguousarray(load_galaxy().points)
    rng = np.random.default_rng(0)
    wide = np.vstack([galaxy, rng.normal(20, 5, size=(918, 1))])
    cases = [
        ("prior_sweep m=100", "prior_sweep", prior_case(100, 1)),
        ("prior_sweep m=1000", "prior_sweep", prior_case(1000, 2)),
        ("gauss_sweep galaxy m=82", "gauss_sweep", gauss_case(galaxy, 3)),
        ("gauss_sweep m=1000", "gauss_sweep", gauss_case(wide, 4)),
    ]
    print(f"{'case':<26}{'python (ms)':>13}{'cython (ms)':>13}{'speedup':>10}  parity")
    for label, name, args in cases:
        t_py, (l_py, st_py) = timed(getattr(_kernels_py, name), args, opts.repeat)
        if compiled is None:
            print(f"{label:<26}{t_py * 1e3:>13.3f}{'n/a':>13}{'':>10}  (extension not built)")
            continue
        t_c, (l_c, st_c) = timed(getattr(compiled, name), args, opts.repeat)
        z_index = 1 if name == "gauss_sweep" else 0
        same = l_py == l_c and np.array_equal(st_py[z_index], st_c[z_index])
        print(f"{label:<26}{t_py * 1e3:>13.3f}{t_c * 1e3:>13.3f}{t_py / t_c:>9.1f}x  {'ok' if same else 'MISMATCH'}")


if __name__ == "__main__":
    main()
