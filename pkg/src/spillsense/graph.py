"""Interference networks, exposure mappings and exact exposure distributions."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ExposureOverflowError, InputDomainError

EXPOSURE_KINDS = ("count", "any", "threshold")


@dataclass(frozen=True, eq=False)
class InterferenceNetwork:
    """Neighbor sets stored in compressed sparse row form.

    ``indices[indptr[i]:indptr[i + 1]]`` is the strictly increasing list of
    unit ``i``'s neighbors.  Construct through :meth:`from_edges` or
    :meth:`from_adjacency` unless you already hold canonical CSR arrays.
    """

    unit_count: int
    indptr: np.ndarray
    indices: np.ndarray
    directed: bool = False

    def __post_init__(self):
        n = int(self.unit_count)
        if n < 1:
            raise InputDomainError("unit_count must be positive")
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        if indptr.shape != (n + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise InputDomainError("malformed indptr")
        if indptr[-1] != indices.shape[0]:
            raise InputDomainError("indptr does not match indices length")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise InputDomainError("neighbor index out of range")
        owner = np.repeat(np.arange(n), np.diff(indptr))
        if np.any(indices == owner):
            raise InputDomainError("self-loops are not allowed")
        # strictly increasing within each row
        same_row = owner[1:] == owner[:-1]
        if np.any((np.diff(indices) <= 0) & same_row):
            raise InputDomainError("neighbor lists must be strictly increasing")
        if not self.directed:
            fwd = owner * n + indices
            bwd = indices * n + owner
            if not np.array_equal(np.sort(fwd), np.sort(bwd)):
                raise InputDomainError("undirected network is not symmetric")
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "unit_count", n)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_edges(cls, unit_count, edges, directed=False):
        """Build from ``(src, dst)`` pairs; undirected edges are listed once."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= unit_count):
            raise InputDomainError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InputDomainError("self-loops are not allowed")
        src, dst = edges[:, 0], edges[:, 1]
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        keys = np.unique(src * unit_count + dst)
        src, dst = keys // unit_count, keys % unit_count
        indptr = np.zeros(unit_count + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return cls(unit_count, np.cumsum(indptr), dst, directed)

    @classmethod
    def from_adjacency(cls, adjacency, directed=False):
        rows = [sorted(set(int(j) for j in nbrs)) for nbrs in adjacency]
        indptr = np.cumsum([0] + [len(r) for r in rows])
        indices = np.array([j for r in rows for j in r], dtype=np.int64)
        return cls(len(rows), indptr, indices, directed)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self):
        """Edge array; undirected edges appear once with ``src < dst``."""
        owner = np.repeat(np.arange(self.unit_count), self.degrees)
        pairs = np.column_stack([owner, self.indices])
        if not self.directed:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs


@dataclass(frozen=True)
class ExposureSpec:
    """Summary of neighbor treatments into a level in ``0..g_max``.

    ``kind`` is ``"count"`` (number of treated neighbors), ``"any"`` or
    ``"threshold"`` (at least ``k`` treated).  For count exposures, values
    above ``g_max`` raise :class:`ExposureOverflowError` unless ``clamp``.
    """

    kind: str = "count"
    g_max: int = 1
    k: int = field(default=1)
    clamp: bool = False

    def __post_init__(self):
        if self.kind not in EXPOSURE_KINDS:
            raise InputDomainError(f"unknown exposure kind {self.kind!r}")
        if int(self.g_max) != self.g_max or self.g_max < 0:
            raise InputDomainError("g_max must be a non-negative integer")
        if self.kind in ("any", "threshold") and self.g_max != 1:
            raise InputDomainError(f"{self.kind} exposure requires g_max = 1")
        if self.kind == "threshold" and (int(self.k) != self.k or self.k < 1):
            raise InputDomainError("threshold k must be a positive integer")

    @classmethod
    def count(cls, g_max, clamp=False):
        return cls("count", g_max, 1, clamp)

    @classmethod
    def any(cls):
        return cls("any", 1)

    @classmethod
    def threshold(cls, k):
        return cls("threshold", 1, k)

    def to_dict(self):
        return {"kind": self.kind, "g_max": int(self.g_max), "k": int(self.k), "clamp": bool(self.clamp)}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", "count"), int(d.get("g_max", 1)), int(d.get("k", 1)), bool(d.get("clamp", False)))


def _as_binary(values):
    arr = np.asarray(values)
    if arr.size == 0:
        return arr.astype(np.int64).reshape(arr.shape)
    if not np.all((arr == 0) | (arr == 1)):
        raise InputDomainError("treatments must be 0/1")
    return arr.astype(np.int64)


def summarize_counts(spec, counts):
    """Map raw treated-neighbor counts (any shape) to exposure levels."""
    counts = np.asarray(counts, dtype=np.int64)
    if spec.kind == "any":
        return (counts >= 1).astype(np.int64)
    if spec.kind == "threshold":
        return (counts >= spec.k).astype(np.int64)
    over = counts > spec.g_max
    if np.any(over):
        if not spec.clamp:
            raise ExposureOverflowError(
                f"count exposure {int(counts.max())} exceeds g_max={spec.g_max}; enable clamping to fold it"
            )
        counts = np.minimum(counts, spec.g_max)
    return counts


def exposure_value(spec, neighbor_treatments):
    """Exposure level for one unit given its neighbors' binary treatments."""
    t = _as_binary(neighbor_treatments).ravel()
    return int(summarize_counts(spec, np.array([t.sum()]))[0])


def neighborhood_exposures(network, treatments, spec):
    """Exposure level of every unit; isolated units get 0."""
    t = _as_binary(treatments)
    if t.shape != (network.unit_count,):
        raise InputDomainError(f"expected {network.unit_count} treatments, got shape {t.shape}")
    counts = _kernels.neighbor_counts(network.indptr, network.indices, t)
    return summarize_counts(spec, counts)


def _check_probs(probabilities):
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InputDomainError("probabilities must lie in [0, 1]")
    return p


def poisson_binomial_pmf(probabilities):
    """Exact pmf of a sum of independent Bernoulli draws (length n + 1)."""
    return _kernels.poisson_binomial(_check_probs(probabilities))


def fold_count_pmf(spec, pmf):
    """Collapse count pmfs (last axis = count) onto the levels of ``spec``.

    Works on a single pmf or a stack of them.
    """
    pmf = np.asarray(pmf, dtype=np.float64)
    width = pmf.shape[-1]
    if spec.kind == "count":
        g = spec.g_max
        if width <= g + 1:
            pad = [(0, 0)] * (pmf.ndim - 1) + [(0, g + 1 - width)]
            return np.pad(pmf, pad)
        tail = pmf[..., g + 1:]
        if np.any(tail > 0) and not spec.clamp:
            raise ExposureOverflowError(
                f"exposure count can exceed g_max={spec.g_max}; enable clamping to fold it"
            )
        out = pmf[..., : g + 1].copy()
        out[..., g] += tail.sum(axis=-1)
        return out
    cut = 1 if spec.kind == "any" else spec.k
    below = pmf[..., :cut].sum(axis=-1)
    above = pmf[..., cut:].sum(axis=-1)
    return np.stack([below, above], axis=-1)


def exposure_distribution(spec, neighbor_propensities):
    """Distribution of the exposure level over ``0..g_max``."""
    return fold_count_pmf(spec, poisson_binomial_pmf(neighbor_propensities))


def exposure_distributions(network, propensities, spec):
    """Exposure pmf of every unit, as a ``(unit_count, levels)`` array."""
    p = _check_probs(propensities)
    if p.shape != (network.unit_count,):
        raise InputDomainError("one propensity per unit required")
    width = int(network.degrees.max(initial=0)) + 1
    counts = _kernels.batch_poisson_binomial(network.indptr, network.indices, p, width)
    return fold_count_pmf(spec, counts)
