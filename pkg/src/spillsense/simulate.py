"""Synthetic populations on interference networks.

A population realizes covariates, population membership and treatments per
unit, then computes each unit's exposure from its neighbors' treatments.
Outcomes are read off the scenario's outcome table, so the observed outcome
always equals the potential outcome at the realized ``(a, g)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ExposureOverflowError, InputDomainError
from .estimate import ObservedSample
from .graph import (
    ExposureSpec,
    InterferenceNetwork,
    exposure_distributions,
    neighborhood_exposures,
    summarize_counts,
)
from .measure import OUTCOME_ROLES, ROLES, TRUE_PROPENSITY_ROLES, PopulationMeasure
from .scenario import SELECTION_PARENTS, enumerate_joint, require_valid
from . import _kernels

NETWORK_KINDS = ("erdos_renyi", "k_regular_ring", "star")


def generate_network(kind, unit_count, seed=None, *, p=None, k=None):
    """Undirected random or structured network in canonical form.

    Parameters
    ----------
    kind : {"erdos_renyi", "k_regular_ring", "star"}
    unit_count : int
    seed : int, optional
        Only used by ``erdos_renyi``.
    p : float
        Edge probability for ``erdos_renyi``.
    k : int
        Even degree for ``k_regular_ring``; each unit links to ``k/2``
        units on either side.
    """
    n = int(unit_count)
    if n < 1:
        raise InputDomainError("unit_count must be positive")
    if kind == "erdos_renyi":
        if p is None or not 0.0 <= p <= 1.0:
            raise InputDomainError("erdos_renyi needs p in [0, 1]")
        rng = np.random.default_rng(seed)
        src, dst = np.triu_indices(n, k=1)
        hit = rng.random(src.shape[0]) < p
        edges = np.column_stack([src[hit], dst[hit]])
    elif kind == "k_regular_ring":
        if k is None or k < 0 or k % 2 or k >= n:
            raise InputDomainError("k_regular_ring needs an even k with 0 <= k < unit_count")
        units = np.arange(n)
        edges = np.concatenate([np.column_stack([units, (units + d) % n]) for d in range(1, k // 2 + 1)]
                               or [np.empty((0, 2), dtype=np.int64)])
    elif kind == "star":
        edges = np.column_stack([np.zeros(n - 1, dtype=np.int64), np.arange(1, n)])
    else:
        raise InputDomainError(f"unknown network kind {kind!r}; expected one of {NETWORK_KINDS}")
    return InterferenceNetwork.from_edges(n, edges)


@dataclass(frozen=True, eq=False)
class SyntheticPopulation:
    """Per-unit realization of a scenario on a network.

    ``po`` has shape (units, 2, g_max + 1); in undefined-outcome mode entries
    with ``g > n`` are NaN.  ``covariates`` maps every role to its values.
    """

    network: InterferenceNetwork
    covariates: dict
    s: np.ndarray
    n: np.ndarray
    propensity: np.ndarray
    a: np.ndarray
    g: np.ndarray
    po: np.ndarray
    y: np.ndarray
    seed: int | None
    exposure: ExposureSpec
    undefined_po: bool = False

    @property
    def unit_count(self):
        return self.network.unit_count

    @property
    def g_max(self):
        return self.exposure.g_max

    def observed_sample(self, reference_only=False):
        """Observables a naive analyst would see."""
        keep = self.s == 1 if reference_only else np.ones(self.unit_count, dtype=bool)
        return ObservedSample(self.a[keep], self.y[keep], self.covariates["X_AY"][keep], self.s[keep])


def _draw_roles(spec, rng, size):
    cov = {}
    for role in ROLES:
        if role in spec.aliases:
            continue
        pmf = spec.blocks[role]
        cov[role] = rng.choice(pmf.shape[0], size=size, p=pmf) if pmf.shape[0] > 1 else np.zeros(size, np.int64)
    for role, target in spec.aliases.items():
        cov[role] = cov[target]
    return {r: np.asarray(cov[r], dtype=np.int64) for r in ROLES}


def _propensities(spec, cov, s):
    return spec.propensity[(s - 1,) + tuple(cov[r] for r in TRUE_PROPENSITY_ROLES)]


def _po_rows(spec, cov):
    # (units, 2, levels)
    idx = tuple(cov[r] for r in OUTCOME_ROLES)
    return np.moveaxis(spec.outcome[(slice(None), slice(None)) + idx], -1, 0).copy()


def generate_population(spec, network, seed, exposure=None):
    """Realize ``spec`` on ``network`` with structural exposure.

    Draw order is fixed: covariate roles in canonical order, then ``S``,
    then treatments, all from one seeded generator.  The exposure table of
    the scenario is not used; exposure comes from neighbors' treatments.
    In undefined-outcome mode (scenario with a degree table) each unit's
    neighbor count is its degree, which must not exceed ``g_max``.
    """
    require_valid(spec)
    exposure = exposure or ExposureSpec.count(spec.g_max)
    if exposure.g_max != spec.g_max:
        raise InputDomainError("exposure mapping and scenario disagree on g_max")
    degrees = network.degrees
    undefined = spec.undefined_po
    if undefined and exposure.kind == "count" and degrees.max(initial=0) > spec.g_max:
        raise ExposureOverflowError(
            f"max degree {int(degrees.max())} exceeds g_max={spec.g_max} in undefined-outcome mode"
        )
    rng = np.random.default_rng(seed)
    size = network.unit_count
    cov = _draw_roles(spec, rng, size)
    p_sel = spec.selection[tuple(cov[r] for r in SELECTION_PARENTS)]
    s = np.where(rng.random(size) < p_sel, 1, 2).astype(np.int64)
    prop = _propensities(spec, cov, s)
    a = (rng.random(size) < prop).astype(np.int64)
    g = neighborhood_exposures(network, a, exposure)
    po = _po_rows(spec, cov)
    n = degrees.astype(np.int64).copy()
    if undefined:
        undefined_cells = np.arange(spec.levels)[None, :] > n[:, None]
        po[np.broadcast_to(undefined_cells[:, None, :], po.shape)] = np.nan
    y = po[np.arange(size), a, g]
    for arr in (s, n, prop, a, g, po, y, *cov.values()):
        arr.setflags(write=False)
    return SyntheticPopulation(network, cov, s, n, prop, a, g, po, y, seed, exposure, undefined)


def regenerate_treatments(pop, seed, reps):
    """Fresh treatment draws on a fixed population; returns ``(a, g)`` of shape (reps, units)."""
    rng = np.random.default_rng(seed)
    a = (rng.random((reps, pop.unit_count)) < pop.propensity[None, :]).astype(np.int64)
    counts = _kernels.neighbor_counts(pop.network.indptr, pop.network.indices, a)
    return a, summarize_counts(pop.exposure, counts)


def _supports(pop, spec):
    if spec is not None:
        return {r: spec.support(r) for r in ROLES}
    return {r: int(pop.covariates[r].max(initial=0)) + 1 for r in ROLES}


def configuration_conditional_measure(pop, spec=None):
    """Exact measure given covariates, populations and the network.

    Atoms are ``(unit, a, g)``.  Treatments are independent coins with the
    units' true propensities, so each unit's exposure law is the
    Poisson-binomial distribution of its neighbors' propensities, folded
    onto the exposure levels.
    """
    size = pop.unit_count
    pmf = exposure_distributions(pop.network, pop.propensity, pop.exposure)  # (units, levels)
    levels = pmf.shape[1]
    unit = np.repeat(np.arange(size), 2 * levels)
    a = np.tile(np.repeat([0, 1], levels), size)
    g = np.tile(np.arange(levels), 2 * size)
    p_a = np.where(a == 1, pop.propensity[unit], 1.0 - pop.propensity[unit])
    weights = p_a * pmf[unit, g] / size
    columns = {r: pop.covariates[r][unit] for r in ROLES}
    columns.update(s=pop.s[unit], a=a, g=g, unit=unit)
    if pop.undefined_po:
        columns["n"] = pop.n[unit]
    # renormalize away rounding in the convolution
    weights = weights / _kernels.compensated_sum(weights)
    return PopulationMeasure(
        columns, weights, pop.propensity[unit], pop.po, unit, pop.g_max, "configuration_conditional",
        _supports(pop, spec), undefined_po=pop.undefined_po, g_mode="structural",
    )


def empirical_measure(pop, spec=None):
    """Uniform measure over the realized units."""
    size = pop.unit_count
    unit = np.arange(size)
    columns = {r: pop.covariates[r] for r in ROLES}
    columns.update(s=pop.s, a=pop.a, g=pop.g, unit=unit)
    if pop.undefined_po:
        columns["n"] = pop.n
    return PopulationMeasure(
        columns, np.full(size, 1.0 / size), pop.propensity, pop.po, unit, pop.g_max, "empirical_sample",
        _supports(pop, spec), undefined_po=pop.undefined_po, g_mode="structural",
    )


@dataclass(frozen=True, eq=False)
class ObservationDraw:
    """IID draws from a scenario's joint law (no network)."""

    columns: dict
    y: np.ndarray

    def observed_sample(self):
        c = self.columns
        return ObservedSample(c["a"], self.y, c["X_AY"], c["s"])


def sample_observations(spec, n, seed):
    """Draw ``n`` independent units from the exact joint enumeration."""
    enum = enumerate_joint(spec)
    rng = np.random.default_rng(seed)
    p = enum.weights / enum.weights.sum()
    idx = rng.choice(len(enum), size=int(n), p=p)
    cols = {k: v[idx] for k, v in enum.columns.items()}
    idx_y = (cols["a"], cols["g"]) + tuple(cols[r] for r in OUTCOME_ROLES)
    return ObservationDraw(cols, spec.outcome[idx_y])
