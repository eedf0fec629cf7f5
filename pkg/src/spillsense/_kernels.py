"""Numeric inner loops with two interchangeable backends.

Each kernel exists as a plain loop (compiled with ``numba.njit`` when numba
is available) and as a vectorized numpy routine.  The active backend is picked
once at import: numba, unless ``SPILLSENSE_DISABLE_NUMBA`` is set to a truthy
value or numba fails to import.  Both backends stay reachable through
:func:`get_backend` so tests and benchmarks can compare them.

All reductions use compensated summation, so results do not depend on how
many terms a sum has or in what chunking it was produced.
"""

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _numba_disabled():
    flag = os.environ.get("SPILLSENSE_DISABLE_NUMBA", "")
    return flag.strip().lower() not in ("", "0", "false", "no", "off")


# ---------------------------------------------------------------------------
# loop versions (numba-compatible; also valid, slow, pure Python)

def _csum_loop(x):
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def _group_csum_loop(keys, x, n_groups):
    s = np.zeros(n_groups)
    c = np.zeros(n_groups)
    for i in range(keys.shape[0]):
        k = keys[i]
        v = x[i]
        sk = s[k]
        t = sk + v
        if abs(sk) >= abs(v):
            c[k] += (sk - t) + v
        else:
            c[k] += (v - t) + sk
        s[k] = t
    return s + c


def _poisson_binomial_loop(p):
    n = p.shape[0]
    pmf = np.zeros(n + 1)
    pmf[0] = 1.0
    for j in range(n):
        q = p[j]
        r = 1.0 - q
        for k in range(j + 1, 0, -1):
            pmf[k] = pmf[k] * r + pmf[k - 1] * q
        pmf[0] = pmf[0] * r
    return pmf


def _batch_poisson_binomial_loop(indptr, indices, probs, width):
    units = indptr.shape[0] - 1
    out = np.zeros((units, width))
    for i in range(units):
        out[i, 0] = 1.0
        m = 0
        for e in range(indptr[i], indptr[i + 1]):
            q = probs[indices[e]]
            r = 1.0 - q
            for k in range(m + 1, 0, -1):
                out[i, k] = out[i, k] * r + out[i, k - 1] * q
            out[i, 0] = out[i, 0] * r
            m += 1
    return out


def _neighbor_counts_loop(indptr, indices, treatments):
    reps = treatments.shape[0]
    units = indptr.shape[0] - 1
    out = np.zeros((reps, units), dtype=np.int64)
    for r in range(reps):
        for i in range(units):
            total = 0
            for e in range(indptr[i], indptr[i + 1]):
                total += treatments[r, indices[e]]
            out[r, i] = total
    return out


# ---------------------------------------------------------------------------
# numpy versions

def _csum_numpy(x):
    return math.fsum(np.asarray(x, dtype=np.float64).tolist())


def _group_csum_numpy(keys, x, n_groups):
    keys = np.asarray(keys)
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    sx = x[order]
    out = np.zeros(n_groups)
    bounds = np.searchsorted(sk, np.arange(n_groups + 1))
    for g in range(n_groups):
        lo, hi = bounds[g], bounds[g + 1]
        if hi > lo:
            out[g] = math.fsum(sx[lo:hi].tolist())
    return out


def _poisson_binomial_numpy(p):
    pmf = np.ones(1)
    for q in np.asarray(p, dtype=np.float64):
        r = 1.0 - q
        nxt = np.empty(pmf.shape[0] + 1)
        nxt[0] = pmf[0] * r
        nxt[1:-1] = pmf[1:] * r + pmf[:-1] * q
        nxt[-1] = pmf[-1] * q
        pmf = nxt
    return pmf


def _batch_poisson_binomial_numpy(indptr, indices, probs, width):
    units = indptr.shape[0] - 1
    degree = np.diff(indptr)
    out = np.zeros((units, width))
    out[:, 0] = 1.0
    # one convolution step per neighbor rank, vectorized across units
    for j in range(int(degree.max()) if units else 0):
        rows = np.nonzero(degree > j)[0]
        q = probs[indices[indptr[rows] + j]][:, None]
        cur = out[rows, : j + 2]
        nxt = np.empty_like(cur)
        nxt[:, 0] = cur[:, 0] * (1.0 - q[:, 0])
        nxt[:, 1:] = cur[:, 1:] * (1.0 - q) + cur[:, :-1] * q
        out[rows, : j + 2] = nxt
    return out


def _neighbor_counts_numpy(indptr, indices, treatments):
    treatments = np.asarray(treatments)
    reps = treatments.shape[0]
    units = indptr.shape[0] - 1
    if indices.shape[0] == 0:
        return np.zeros((reps, units), dtype=np.int64)
    gathered = treatments[:, indices].astype(np.int64)
    starts = np.minimum(indptr[:-1], indices.shape[0] - 1)
    out = np.add.reduceat(gathered, starts, axis=1)
    out[:, indptr[:-1] == indptr[1:]] = 0
    return out


_NUMPY = SimpleNamespace(
    name="numpy",
    compensated_sum=_csum_numpy,
    group_compensated_sum=_group_csum_numpy,
    poisson_binomial=_poisson_binomial_numpy,
    batch_poisson_binomial=_batch_poisson_binomial_numpy,
    neighbor_counts=_neighbor_counts_numpy,
)

_numba_backend = None


def _build_numba():
    global _numba_backend
    if _numba_backend is None:
        jit = numba.njit(cache=True)
        _numba_backend = SimpleNamespace(
            name="numba",
            compensated_sum=jit(_csum_loop),
            group_compensated_sum=jit(_group_csum_loop),
            poisson_binomial=jit(_poisson_binomial_loop),
            batch_poisson_binomial=jit(_batch_poisson_binomial_loop),
            neighbor_counts=jit(_neighbor_counts_loop),
        )
    return _numba_backend


def numba_available():
    return numba is not None


def get_backend(name=None):
    """Return the kernel namespace for ``name`` ("numba" or "numpy").

    ``None`` returns the backend selected at import time.
    """
    if name is None:
        return ACTIVE
    if name == "numpy":
        return _NUMPY
    if name == "numba":
        if numba is None:
            raise RuntimeError("numba is not installed")
        return _build_numba()
    raise ValueError(f"unknown backend {name!r}")


ACTIVE = _NUMPY if (numba is None or _numba_disabled()) else _build_numba()
BACKEND = ACTIVE.name


# thin wrappers normalizing dtypes, so callers never trip numba's typing

def compensated_sum(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    return float(ACTIVE.compensated_sum(x))


def group_compensated_sum(keys, x, n_groups):
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return ACTIVE.group_compensated_sum(keys, x, int(n_groups))


def poisson_binomial(p):
    return ACTIVE.poisson_binomial(np.ascontiguousarray(p, dtype=np.float64))


def batch_poisson_binomial(indptr, indices, probs, width):
    return ACTIVE.batch_poisson_binomial(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(probs, dtype=np.float64),
        int(width),
    )


def neighbor_counts(indptr, indices, treatments):
    treatments = np.ascontiguousarray(treatments, dtype=np.int64)
    squeeze = treatments.ndim == 1
    if squeeze:
        treatments = treatments[None, :]
    out = ACTIVE.neighbor_counts(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        treatments,
    )
    return out[0] if squeeze else out
