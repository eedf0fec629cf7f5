"""Bias decompositions of the naive IPW functional.

Every breakdown stores covariances as the primary quantity and derives the
correlation-times-standard-deviations factorization from them.  Each output
also carries the directly computed bias and the residual between the two,
which is the self-check for the whole pipeline.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ModeError, UndefinedStratumError
from .estimate import effect_tables, mew_scores, naive_functional_psi, oracle_estimands
from .measure import EXPOSURE_OUTCOME_ROLES
from .scenario import require_transportable

DEGENERATE_SD = 1e-12


@dataclass
class Component:
    """One covariance term and its factorization.

    ``sigma_left`` is the spread of the outcome-side variable, ``sigma_eps``
    the spread of the weighting score (or of the exposure-probability gap
    for transport terms, stored as ``sigma_upsilon``).
    """

    cov: float
    sigma_left: float
    sigma_right: float
    rho: float
    degenerate: bool
    index: dict = field(default_factory=dict)
    mean_tau: float | None = None
    marginal_gap: float | None = None
    std_error: float | None = None
    weight: float | None = None

    def to_dict(self, right_name="sigma_eps"):
        d = dict(self.index)
        d.update({"cov": self.cov, "sigma_left": self.sigma_left, right_name: self.sigma_right,
                  "rho": self.rho, "degenerate": self.degenerate})
        for key in ("mean_tau", "marginal_gap", "std_error", "weight"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d


def _component(measure, x, y, given, index, with_se=False):
    cov, sx, sy = measure.moments(x, y, given)
    degenerate = sx < DEGENERATE_SD or sy < DEGENERATE_SD
    rho = 0.0 if degenerate else float(np.clip(cov / (sx * sy), -1.0, 1.0))
    se = None
    if with_se:
        w = measure.weights[given] if given is not None else measure.weights
        xx = np.asarray(x)[given] if given is not None else np.asarray(x)
        yy = np.asarray(y)[given] if given is not None else np.asarray(y)
        w = w / w.sum()
        prod = (xx - np.sum(w * xx)) * (yy - np.sum(w * yy))
        n = prod.shape[0]
        se = float(np.sqrt(np.sum(w * (prod - cov) ** 2) / max(n - 1, 1))) if n > 1 else float("nan")
    return Component(float(cov), float(sx), float(sy), rho, bool(degenerate), index, std_error=se)


def _signed_total(components, key="a"):
    terms = [(-1.0) ** (1 - c.index[key]) * c.cov for c in components]
    return _kernels.compensated_sum(np.array(terms)) if terms else 0.0


@dataclass
class BiasBreakdown:
    t1: list
    t2: list
    t3: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    direct: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    t2_by_n: list = field(default_factory=list)

    @property
    def T1(self):
        return self.totals["T1"]

    @property
    def T2(self):
        return self.totals["T2"]

    @property
    def T3(self):
        return self.totals.get("T3")

    def max_residual(self):
        vals = [abs(v) for v in self.residuals.values() if v is not None]
        return max(vals) if vals else 0.0

    def to_dict(self):
        out = {
            "t1": [c.to_dict() for c in self.t1],
            "t2": [c.to_dict() for c in self.t2],
            "t3": [c.to_dict("sigma_upsilon") for c in self.t3],
            "totals": dict(self.totals),
            "direct": dict(self.direct),
            "residuals": dict(self.residuals),
            "flags": dict(self.flags),
        }
        if self.t2_by_n:
            out["t2_by_n"] = [c.to_dict() for c in self.t2_by_n]
        return out


def _flags(measure):
    return {
        "mode": "exact" if measure.exact else "approximate",
        "provenance": measure.provenance,
        "population_weights": {str(k): v for k, v in measure.population_weights().items()},
    }


def _ref_mask(measure):
    ref = measure.event(s=1)
    if not measure.probability(ref) > 0:
        raise UndefinedStratumError("the measure puts no mass on the reference population S=1")
    return ref


def _t1_t2(measure, eps, effects, ref, approx):
    t1, t2 = [], []
    for a in (0, 1):
        t1.append(_component(measure, measure.potential_outcome(a, 0), eps[a], ref, {"a": a}, approx))
        t2.append(_component(measure, effects.gamma[:, a], eps[a], ref, {"a": a}, approx))
    return t1, t2


def bias_phi1(measure, spec=None):
    """Decompose ``psi - phi_1`` into the baseline-outcome and spillover terms."""
    ref = _ref_mask(measure)
    approx = not measure.exact
    eps = mew_scores(measure)
    eff = effect_tables(measure)
    t1, t2 = _t1_t2(measure, eps, eff, ref, approx)
    psi = naive_functional_psi(measure)
    phi1 = measure.expect(eff.kappa, ref)
    T1, T2 = _signed_total(t1), _signed_total(t2)
    flags = _flags(measure)
    flags["mean_eps"] = [measure.expect(eps[0], ref), measure.expect(eps[1], ref)]
    return BiasBreakdown(
        t1, t2,
        totals={"T1": T1, "T2": T2, "T1+T2": T1 + T2},
        direct={"psi": psi, "phi1": phi1, "bias_phi1": psi - phi1},
        residuals={"bias_phi1": (psi - phi1) - (T1 + T2)},
        flags=flags,
    )


def _require_tabular(measure):
    if measure.g_mode != "tabular":
        raise ModeError("transport terms are only defined for measures with tabular exposure")
    if sorted(measure.populations()) != [1, 2]:
        raise ModeError("transport terms need mass on both populations")


def _upsilon_terms(measure, eff, given_by_g=None, scale_by_g=None):
    """Per-level transport components with the exposure-probability gap."""
    comps = []
    g = measure["g"]
    masses = {s: measure.probability(measure.event(s=s)) for s in (1, 2)}
    approx = not measure.exact
    for level in range(measure.g_max + 1):
        given = None if given_by_g is None else given_by_g(level)
        if given is not None and not measure.probability(given) > 0:
            comps.append(Component(0.0, 0.0, 0.0, 0.0, True, {"g": level}, mean_tau=0.0, marginal_gap=0.0))
            continue
        hit = (g == level).astype(np.float64)
        probs = {}
        for s in (1, 2):
            sel = measure.event(s=s) if given is None else measure.event(s=s) & given
            scale = 1.0 if scale_by_g is None else scale_by_g(level, s)
            if scale == 0:
                probs[s] = np.zeros(len(measure))
                continue
            probs[s] = measure.conditional_mean(hit, EXPOSURE_OUTCOME_ROLES, given=sel, spread=True) * scale
        mask = np.ones(len(measure), dtype=bool) if given is None else given
        upsilon = probs[1] - probs[2]
        if np.any(~np.isfinite(upsilon[mask])):
            raise UndefinedStratumError("an outcome-side exposure stratum has mass in only one population")
        tau = np.nan_to_num(eff.tau[:, level])
        comp = _component(measure, tau, np.where(mask, upsilon, 0.0), given, {"g": level}, approx)
        comp.mean_tau = measure.expect(tau, given)
        m1 = measure.probability(measure.event(s=1) & (g == level)) / masses[1]
        m2 = measure.probability(measure.event(s=2) & (g == level)) / masses[2]
        comp.marginal_gap = m1 - m2
        comps.append(comp)
    return comps


def _t3_total(comps):
    terms = [c.cov + c.mean_tau * c.marginal_gap for c in comps]
    return _kernels.compensated_sum(np.array(terms))


def bias_phi2(measure, spec=None):
    """Decompose ``psi - phi_2``: the reference-population bias plus transport."""
    _require_tabular(measure)
    if spec is not None:
        require_transportable(spec)
    base = bias_phi1(measure, spec)
    eff = effect_tables(measure)
    t3 = _upsilon_terms(measure, eff)
    T3 = _t3_total(t3)
    phi2 = measure.expect(eff.kappa, measure.event(s=2))
    psi = base.direct["psi"]
    base.t3 = t3
    base.totals["T3"] = T3
    base.totals["T1+T2+T3"] = base.totals["T1+T2"] + T3
    base.direct.update({"phi2": phi2, "bias_phi2": psi - phi2})
    base.residuals["bias_phi2"] = (psi - phi2) - base.totals["T1+T2+T3"]
    return base


@dataclass
class ThetaTerms:
    components: list
    total: float
    theta: float
    residual: float

    def to_dict(self):
        return {"t3_theta": [c.to_dict("sigma_pi") for c in self.components], "total": self.total,
                "theta": self.theta, "residual": self.residual}


def t3_theta(measure, spec=None, breakdown=None):
    """Transport term when the target is the exposure-randomized estimand."""
    if measure.g_mode != "tabular":
        raise ModeError("the randomized-exposure term needs a measure with tabular exposure")
    if spec is not None:
        require_transportable(spec)
    base = breakdown or bias_phi1(measure, spec)
    eff = effect_tables(measure)
    ref = _ref_mask(measure)
    hit_g = measure["g"]
    comps = []
    for level in range(measure.g_max + 1):
        pi_all = measure.conditional_mean((hit_g == level).astype(np.float64), EXPOSURE_OUTCOME_ROLES,
                                          given=ref, spread=True)
        defined = np.isfinite(pi_all)
        tau = np.nan_to_num(eff.tau[:, level])
        comps.append(_component(measure, tau, np.where(defined, pi_all, 0.0), defined, {"g": level},
                                not measure.exact))
    total = _kernels.compensated_sum(np.array([c.cov for c in comps]))
    theta = oracle_estimands(measure).theta
    psi = base.direct["psi"]
    residual = (psi - theta) - (base.totals["T1+T2"] + total)
    return ThetaTerms(comps, total, theta, residual)


@dataclass
class CorollaryReport:
    equal_marginals: bool
    randomized: bool
    cov_part: float
    gap_part: float
    t3: float
    residual_equal_marginals: float | None
    residual_randomized: float | None
    message: str

    @property
    def max_residual(self):
        vals = [abs(v) for v in (self.residual_equal_marginals, self.residual_randomized) if v is not None]
        return max(vals) if vals else 0.0

    def to_dict(self):
        return dict(vars(self), max_residual=self.max_residual)


def check_corollary(measure, spec=None, tol=1e-12, breakdown=None):
    """Test which simplification of the transport term applies and how well."""
    bd = breakdown if breakdown is not None and breakdown.t3 else bias_phi2(measure, spec)
    gaps = np.array([c.marginal_gap for c in bd.t3])
    equal = bool(np.all(np.abs(gaps) <= tol))
    randomized = True
    hit_g = measure["g"]
    for s in (1, 2):
        sel = measure.event(s=s)
        for level in range(measure.g_max + 1):
            p = measure.conditional_mean((hit_g == level).astype(np.float64), EXPOSURE_OUTCOME_ROLES, given=sel)
            vals = p[sel]
            if vals.size and np.nanmax(vals) - np.nanmin(vals) > tol:
                randomized = False
    cov_part = _kernels.compensated_sum(np.array([c.cov for c in bd.t3]))
    gap_part = _kernels.compensated_sum(np.array([c.mean_tau * c.marginal_gap for c in bd.t3]))
    T3 = bd.totals["T3"]
    res_eq = T3 - cov_part if equal else None
    res_rand = T3 - gap_part if randomized else None
    names = [n for n, ok in (("equal marginals", equal), ("randomized exposure", randomized)) if ok]
    message = "branches: " + ", ".join(names) if names else "no branch applies"
    return CorollaryReport(equal, randomized, cov_part, gap_part, T3, res_eq, res_rand, message)


def shen_decomposition(measure, spec=None):
    """Two-term decomposition using scores that condition on outcome confounders only.

    Matches the reference-population bias when there is no interference.
    """
    ref = _ref_mask(measure)
    pseudo = measure.conditional_mean((measure["a"] == 1).astype(float), ("X_AY",), given=ref)
    partial = measure.conditional_mean(measure.prop_true, ("X_AY", "U_AY"), given=ref)
    comps = []
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = {1: np.where(ref, partial / pseudo, 0.0), 0: np.where(ref, (1 - partial) / (1 - pseudo), 0.0)}
    for a in (0, 1):
        comps.append(_component(measure, measure.potential_outcome(a, 0), eps[a], ref, {"a": a}))
    return comps, _signed_total(comps)


def _n_dependence_gap(measure, ref):
    """Largest change in the pseudo-propensity from also conditioning on N (S=1)."""
    treated = (measure["a"] == 1).astype(np.float64)
    plain = measure.conditional_mean(treated, ("X_AY",), given=ref)
    with_n = measure.conditional_mean(treated, ("X_AY", "n"), given=ref)
    diff = np.abs(with_n[ref] - plain[ref])
    return float(np.max(diff)) if diff.size else 0.0


def bias_undefined(measure, spec=None):
    """Decompositions when potential outcomes exist only up to the neighbor count."""
    if not measure.undefined_po:
        raise ModeError("measure has no neighbor-count column; build it from a scenario with a degree table")
    ref = _ref_mask(measure)
    approx = not measure.exact
    eps = mew_scores(measure)
    eff = effect_tables(measure)
    oracle = oracle_estimands(measure)
    psi = naive_functional_psi(measure)
    mass_ref = measure.probability(ref)

    t1 = [_component(measure, measure.potential_outcome(a, 0), eps[a], ref, {"a": a}, approx) for a in (0, 1)]
    by_n = []
    for n in range(measure.g_max + 1):
        sel = ref & measure.event(n=n)
        p_n = measure.probability(sel) / mass_ref
        if p_n == 0:
            continue
        for a in (0, 1):
            comp = _component(measure, eff.gamma[:, a], eps[a], sel, {"a": a, "n": n}, approx)
            comp.weight = p_n
            by_n.append(comp)
    t2 = []
    for a in (0, 1):
        parts = [c for c in by_n if c.index["a"] == a]
        cov = _kernels.compensated_sum(np.array([c.cov * c.weight for c in parts])) if parts else 0.0
        pooled = _component(measure, eff.gamma[:, a], eps[a], ref, {"a": a}, approx)
        pooled.cov = cov
        t2.append(pooled)
    T1, T2 = _signed_total(t1), _signed_total(t2)
    phi1 = oracle.phi[1]
    bd = BiasBreakdown(
        t1, t2, t2_by_n=by_n,
        totals={"T1": T1, "T2": T2, "T1+T2": T1 + T2},
        direct={"psi": psi, "phi1": phi1, "bias_phi1": psi - phi1},
        residuals={"bias_phi1": (psi - phi1) - (T1 + T2)},
        flags=_flags(measure),
    )
    gap = _n_dependence_gap(measure, ref)
    bd.flags["n_dependence_gap"] = gap
    if gap > DEGENERATE_SD:
        # the stratified identity needs scores free of N; a realized network rarely is
        bd.flags["mode"] = "approximate"
    if measure.g_mode == "tabular" and sorted(measure.populations()) == [1, 2]:
        if spec is not None:
            require_transportable(spec)
        pv = {}
        for s in (1, 2):
            mask = measure.event(s=s)
            m = measure.probability(mask)
            pv[s] = [measure.probability(mask & measure.defined(g)) / m for g in range(measure.g_max + 1)]
        t3 = _upsilon_terms(measure, eff, given_by_g=measure.defined, scale_by_g=lambda g, s: pv[s][g])
        T3 = _t3_total(t3)
        phi2 = oracle.phi[2]
        bd.t3 = t3
        bd.totals["T3"] = T3
        bd.totals["T1+T2+T3"] = T1 + T2 + T3
        bd.direct.update({"phi2": phi2, "bias_phi2": psi - phi2})
        bd.residuals["bias_phi2"] = (psi - phi2) - (T1 + T2 + T3)
    return bd
