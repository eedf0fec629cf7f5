"""Estimands, weighting scores, the naive functional and its plug-in estimator."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EstimationError, InputDomainError, PositivityError, UndefinedStratumError
from .measure import PSEUDO_ROLES, PopulationMeasure  # noqa: F401  (re-exported)


def _reference(measure):
    mask = measure.event(s=1)
    if not measure.probability(mask) > 0:
        raise UndefinedStratumError("the measure puts no mass on the reference population S=1")
    return mask


def pseudo_propensity(measure, by=PSEUDO_ROLES):
    """Per-atom ``p(A=1 | S=1, X_AY)`` under ``measure`` (NaN off S=1).

    This is the treatment frequency within each stratum, so on an empirical
    measure it is the stratum-frequency estimator.
    """
    ref = _reference(measure)
    p = measure.conditional_mean(measure["a"] == 1, by, given=ref)
    inside = p[ref]
    if np.any(~np.isfinite(inside)):
        raise UndefinedStratumError("a pseudo-propensity stratum has zero mass given S=1")
    return p


def mew_scores(measure, spec=None, by=PSEUDO_ROLES):
    """Multiplicative error in weights, ``(eps0, eps1)`` per atom.

    ``eps_a`` is the true propensity of arm ``a`` over the pseudo-propensity
    of arm ``a``.  Atoms outside S=1 carry NaN.  ``spec`` is accepted for
    call-site symmetry; all information comes from the measure.
    """
    pseudo = pseudo_propensity(measure, by)
    ref = measure.event(s=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps1 = np.where(ref, measure.prop_true / pseudo, np.nan)
        eps0 = np.where(ref, (1.0 - measure.prop_true) / (1.0 - pseudo), np.nan)
    if np.any(~np.isfinite(eps1[ref])) or np.any(~np.isfinite(eps0[ref])):
        raise UndefinedStratumError("pseudo-propensity hits 0 or 1 in some stratum")
    return eps0, eps1


def naive_functional_psi(measure, spec=None):
    """Exact value of the IPW contrast built on the pseudo-propensity score."""
    ref = _reference(measure)
    pseudo = pseudo_propensity(measure)
    a = measure["a"]
    y = measure.observed_outcome()
    with np.errstate(divide="ignore", invalid="ignore"):
        treated = np.where(a == 1, y / pseudo, 0.0)
        control = np.where(a == 0, y / (1.0 - pseudo), 0.0)
    return measure.expect(treated, ref) - measure.expect(control, ref)


def ipw_identify(measure, spec=None, s=1):
    """IPW contrast with the true propensity score, within population ``s``.

    Identifies the natural average main effect of that population; the same
    formula applies in undefined-outcome mode.
    """
    mask = measure.event(s=s)
    if not measure.probability(mask) > 0:
        raise UndefinedStratumError(f"no mass on population S={s}")
    p = measure.prop_true
    if np.any((p[mask] <= 0) | (p[mask] >= 1)):
        raise PositivityError(f"true propensity leaves (0, 1) in population S={s}")
    a = measure["a"]
    y = measure.observed_outcome()
    with np.errstate(divide="ignore", invalid="ignore"):
        treated = np.where(a == 1, y / p, 0.0)
        control = np.where(a == 0, y / (1.0 - p), 0.0)
    return measure.expect(treated, mask) - measure.expect(control, mask)


@dataclass(frozen=True)
class EffectTables:
    """Per-atom individual effects.

    ``tau`` has shape (atoms, g_max + 1) with NaN where ``Y^(a,g)`` is
    undefined; ``gamma`` has shape (atoms, 2).
    """

    tau: np.ndarray
    gamma: np.ndarray
    kappa: np.ndarray
    total: np.ndarray


def effect_tables(measure, spec=None):
    levels = measure.g_max + 1
    rows = measure.po_table[measure.po_row]  # (atoms, 2, levels)
    g = measure["g"]
    idx = np.arange(len(measure))
    tau = rows[:, 1, :] - rows[:, 0, :]
    if measure.undefined_po:
        tau = np.where(measure["n"][:, None] >= np.arange(levels)[None, :], tau, np.nan)
    natural = rows[idx, :, g]  # Y^(a,G), (atoms, 2)
    gamma = natural - rows[:, :, 0]
    kappa = natural[:, 1] - natural[:, 0]
    return EffectTables(tau, gamma, kappa, kappa + gamma[:, 0])


@dataclass(frozen=True)
class OracleEstimands:
    phi: dict              # s -> natural average main effect
    theta: float           # exposure-randomized variant in S=1
    mean_tau: dict         # s -> array over g of E[tau(g) | S=s, V_g=1]
    mean_tau_all: np.ndarray  # E[tau(g) | V_g=1] over the whole measure
    exposure_marginals: dict  # s -> array over g of p(G=g | S=s)

    @property
    def phi1(self):
        return self.phi[1]

    @property
    def phi2(self):
        return self.phi.get(2)

    def to_dict(self):
        return {
            "phi": {str(k): v for k, v in self.phi.items()},
            "theta": self.theta,
            "mean_tau": {str(k): list(v) for k, v in self.mean_tau.items()},
            "mean_tau_all": list(self.mean_tau_all),
            "exposure_marginals": {str(k): list(v) for k, v in self.exposure_marginals.items()},
        }


def _phi(measure, s, effects):
    mask = measure.event(s=s)
    if not measure.undefined_po:
        return measure.expect(effects.kappa, mask)
    # sum over g of E[1(G=g) tau(g) | S=s, V_g=1] p(V_g=1 | S=s)
    g = measure["g"]
    mass = measure.probability(mask)
    total = []
    for level in range(measure.g_max + 1):
        vg = mask & measure.defined(level)
        p_v = measure.probability(vg) / mass
        if p_v == 0:
            continue
        term = np.where(g == level, np.nan_to_num(effects.tau[:, level]), 0.0)
        total.append(measure.expect(term, vg) * p_v)
    return _kernels.compensated_sum(np.array(total)) if total else 0.0


def oracle_estimands(measure, spec=None):
    """Estimands computed directly from potential outcomes."""
    eff = effect_tables(measure)
    levels = measure.g_max + 1
    phi, mean_tau, marginals = {}, {}, {}
    for s in measure.populations():
        mask = measure.event(s=s)
        if not measure.probability(mask) > 0:
            raise UndefinedStratumError(f"no mass on population S={s}")
        phi[s] = _phi(measure, s, eff)
        mean_tau[s] = np.array([
            measure.expect(np.nan_to_num(eff.tau[:, g]), mask & measure.defined(g))
            if measure.probability(mask & measure.defined(g)) > 0 else np.nan
            for g in range(levels)
        ])
        marginals[s] = np.array([measure.probability(mask & (measure["g"] == g)) for g in range(levels)])
        marginals[s] = marginals[s] / measure.probability(mask)
    if 1 not in phi:
        raise UndefinedStratumError("no mass on the reference population S=1")
    theta_terms = [marginals[1][g] * mean_tau[1][g] for g in range(levels) if marginals[1][g] > 0]
    theta = _kernels.compensated_sum(np.array(theta_terms)) if theta_terms else 0.0
    mean_all = np.array([
        measure.expect(np.nan_to_num(eff.tau[:, g]), measure.defined(g))
        if measure.probability(measure.defined(g)) > 0 else np.nan
        for g in range(levels)
    ])
    return OracleEstimands(phi, theta, mean_tau, mean_all, marginals)


# ---------------------------------------------------------------------------
# samples

@dataclass(frozen=True, eq=False)
class ObservedSample:
    """Observed units.  ``stratum`` is the integer-coded X_AY cell.

    ``s`` defaults to all-reference.  ``pscore_pseudo`` optionally replaces
    the stratum-frequency estimate of ``p(A=1 | S=1, X_AY)``.
    """

    a: np.ndarray
    y: np.ndarray
    stratum: np.ndarray
    s: np.ndarray | None = None
    pscore_pseudo: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 1 or not np.all((a == 0) | (a == 1)):
            raise InputDomainError("treatment column must be a 0/1 vector")
        n = a.shape[0]
        for name in ("y", "stratum", "s", "pscore_pseudo"):
            val = getattr(self, name)
            if val is not None and np.asarray(val).shape != (n,):
                raise InputDomainError(f"column {name} has the wrong length")
        if not np.all(np.isfinite(np.asarray(self.y, dtype=float))):
            raise InputDomainError("outcomes must be finite")

    def __len__(self):
        return np.asarray(self.a).shape[0]


@dataclass(frozen=True)
class IPWEstimate:
    value: float
    std_error: float
    n: int
    n_reference: int


def _plugin_pieces(sample):
    a = np.asarray(sample.a, dtype=np.int64)
    y = np.asarray(sample.y, dtype=np.float64)
    s = np.ones_like(a) if sample.s is None else np.asarray(sample.s, dtype=np.int64)
    ref = s == 1
    n_ref = int(ref.sum())
    if n_ref == 0:
        raise EstimationError("sample has no reference-population units")
    p_s1 = n_ref / a.shape[0]
    if sample.pscore_pseudo is not None:
        p_hat = np.asarray(sample.pscore_pseudo, dtype=np.float64)
        if np.any((p_hat[ref] <= 0) | (p_hat[ref] >= 1)):
            raise EstimationError("supplied pseudo-propensity scores must lie strictly in (0, 1)")
    else:
        strata = np.asarray(sample.stratum)
        codes, inv = np.unique(strata[ref], return_inverse=True)
        treated = np.bincount(inv, weights=a[ref], minlength=codes.size)
        count = np.bincount(inv, minlength=codes.size)
        freq = treated / count
        single = (freq <= 0) | (freq >= 1)
        if np.any(single):
            raise EstimationError(f"stratum {codes[np.flatnonzero(single)[0]].item()!r} has a single treatment arm")
        p_hat = np.full(a.shape[0], np.nan)
        p_hat[ref] = freq[inv]
    contrib = np.zeros(a.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib[ref] = (a[ref] * y[ref] / p_hat[ref] - (1 - a[ref]) * y[ref] / (1.0 - p_hat[ref])) / p_s1
    return contrib, n_ref


def naive_ipw_estimate(sample):
    """Plug-in IPW estimate with stratum-frequency pseudo-propensities."""
    contrib, _ = _plugin_pieces(sample)
    return _kernels.compensated_sum(contrib) / contrib.shape[0]


def naive_ipw_summary(sample):
    """Estimate plus a Monte Carlo standard error.

    The error treats the fitted scores as fixed, which is conservative for
    stratum-frequency scores.
    """
    contrib, n_ref = _plugin_pieces(sample)
    n = contrib.shape[0]
    value = _kernels.compensated_sum(contrib) / n
    se = float(np.std(contrib, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return IPWEstimate(value, se, n, n_ref)


def inverse_odds_summary(pscores, a_levels=(0, 1)):
    """``E[(1 - p_a) / p_a | S=1]`` per arm from pseudo-propensity scores of S=1 units."""
    p = np.asarray(pscores, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)):
        raise EstimationError("pseudo-propensity scores must lie strictly in (0, 1)")
    arm = {1: p, 0: 1.0 - p}
    return tuple(_kernels.compensated_sum((1.0 - arm[a]) / arm[a]) / p.shape[0] for a in a_levels)
