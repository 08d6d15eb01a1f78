"""Compare the numba and numpy solver backends on a synthetic chain.

Usage: python benchmarks/bench_kernels.py [n_states]

Builds a random sparse stochastic matrix with an absorbing tail and times
until-probability solves under both CASSURE_BACKEND settings.
"""

import os
import sys
import time

import numpy as np


def make_chain(n, fanout=4, seed=7):
    rng = np.random.default_rng(seed)
    indptr = [0]
    indices = []
    data = []
    for s in range(n):
        if s >= n - 2:  # two absorbing states at the end
            indices.append(s)
            data.append(1.0)
        else:
            succ = rng.choice(np.arange(s + 1, n), size=min(fanout, n - s - 1),
                              replace=False)
            w = rng.random(succ.size)
            w /= w.sum()
            indices.extend(succ.tolist())
            data.extend(w.tolist())
        indptr.append(len(indices))
    return (np.asarray(indptr, np.int64), np.asarray(indices, np.int64),
            np.asarray(data, np.float64))


def run(backend, indptr, indices, data, method):
    os.environ["CASSURE_BACKEND"] = backend
    # Fresh import so the backend switch takes effect.
    for mod in list(sys.modules):
        if mod.startswith("cassure"):
            del sys.modules[mod]
    from cassure.kernels import get_kernels

    gs, jac, _ = get_kernels()
    sweep = gs if method == "gauss-seidel" else jac
    n = indptr.size - 1
    x = np.zeros(n)
    x[n - 2] = 1.0  # target absorbing state
    unknown = np.arange(n - 2, dtype=np.int64)
    add = np.zeros(n)
    # warm-up compile pass outside the timed region
    sweep(indptr, indices, data, x.copy(), unknown, add)
    t0 = time.perf_counter()
    iters = 0
    while True:
        iters += 1
        if sweep(indptr, indices, data, x, unknown, add) <= 1e-12 or iters > 10000:
            break
    dt = time.perf_counter() - t0
    return dt, iters, x[0]


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    indptr, indices, data = make_chain(n)
    print(f"{n} states, {data.size} transitions")
    for method in ("gauss-seidel", "jacobi"):
        base = None
        for backend in ("numpy", "numba"):
            dt, iters, v = run(backend, indptr, indices, data, method)
            speed = f"  ({base / dt:.1f}x vs numpy)" if base else ""
            base = base or dt
            print(f"{method:12s} {backend:6s}: {dt * 1000:8.1f} ms, "
                  f"{iters} iters, x[0]={v:.12f}{speed}")


if __name__ == "__main__":
    main()
