"""Hot numeric kernels for the iterative solvers.

Two interchangeable backends operate on raw CSR arrays:

* ``numba`` (default): @njit-compiled sweeps.
* ``numpy``: pure-NumPy fallback, selected with ``CASSURE_BACKEND=numpy``.

Both compute identical quantities; ``benchmarks/bench_kernels.py`` compares
their throughput.  The Gauss-Seidel sweep updates in place in state order and
divides out the self-loop mass, which is what gives it its edge on the
near-triangular matrices produced by reachability restriction.
"""

from __future__ import annotations

import os

import numpy as np


def backend_name() -> str:
    choice = os.environ.get("CASSURE_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"CASSURE_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    return choice


# ---- pure-NumPy implementations -----------------------------------------

def _gauss_seidel_sweep_np(indptr, indices, data, x, unknown, add):
    maxdiff = 0.0
    for s in unknown:
        lo, hi = indptr[s], indptr[s + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        self_mask = cols == s
        diag = vals[self_mask].sum()
        acc = add[s] + np.dot(vals[~self_mask], x[cols[~self_mask]])
        v = acc / (1.0 - diag) if diag < 1.0 else acc
        d = abs(v - x[s]) / max(1.0, abs(v))
        if d > maxdiff:
            maxdiff = d
        x[s] = v
    return maxdiff


def _jacobi_sweep_np(indptr, indices, data, x, unknown, add):
    rowid = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
    y = np.bincount(rowid, weights=data * x[indices], minlength=x.size)
    new = add[unknown] + y[unknown]
    diff = np.abs(new - x[unknown]) / np.maximum(1.0, np.abs(new))
    maxdiff = float(diff.max()) if unknown.size else 0.0
    x[unknown] = new
    return maxdiff


def _step_absorbing_np(indptr, indices, data, x, absorbing):
    rowid = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
    y = np.bincount(rowid, weights=data * x[indices], minlength=x.size)
    y[absorbing] = 1.0
    return y


# ---- numba implementations ----------------------------------------------

try:
    from numba import njit

    @njit(cache=True)
    def _gauss_seidel_sweep_nb(indptr, indices, data, x, unknown, add):
        maxdiff = 0.0
        for k in range(unknown.size):
            s = unknown[k]
            acc = add[s]
            diag = 0.0
            for e in range(indptr[s], indptr[s + 1]):
                t = indices[e]
                if t == s:
                    diag += data[e]
                else:
                    acc += data[e] * x[t]
            if diag < 1.0:
                v = acc / (1.0 - diag)
            else:
                v = acc
            scale = abs(v)
            if scale < 1.0:
                scale = 1.0
            d = abs(v - x[s]) / scale
            if d > maxdiff:
                maxdiff = d
            x[s] = v
        return maxdiff

    @njit(cache=True)
    def _jacobi_sweep_nb(indptr, indices, data, x, unknown, add):
        new = np.empty(unknown.size, dtype=np.float64)
        maxdiff = 0.0
        for k in range(unknown.size):
            s = unknown[k]
            acc = add[s]
            for e in range(indptr[s], indptr[s + 1]):
                acc += data[e] * x[indices[e]]
            new[k] = acc
            scale = abs(acc)
            if scale < 1.0:
                scale = 1.0
            d = abs(acc - x[s]) / scale
            if d > maxdiff:
                maxdiff = d
        for k in range(unknown.size):
            x[unknown[k]] = new[k]
        return maxdiff

    @njit(cache=True)
    def _step_absorbing_nb(indptr, indices, data, x, absorbing):
        n = indptr.size - 1
        y = np.zeros(n, dtype=np.float64)
        for s in range(n):
            acc = 0.0
            for e in range(indptr[s], indptr[s + 1]):
                acc += data[e] * x[indices[e]]
            y[s] = acc
        for k in range(absorbing.size):
            y[absorbing[k]] = 1.0
        return y

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def get_kernels():
    """(gauss_seidel_sweep, jacobi_sweep, step_absorbing) for the active backend.

    Each sweep updates x in place over the `unknown` index array with the
    constant term `add`, returning the max per-component change scaled by
    max(1, |value|).  step_absorbing returns P @ x with absorbing states
    pinned to 1.
    """
    if backend_name() == "numba" and HAVE_NUMBA:
        return _gauss_seidel_sweep_nb, _jacobi_sweep_nb, _step_absorbing_nb
    return _gauss_seidel_sweep_np, _jacobi_sweep_np, _step_absorbing_np
