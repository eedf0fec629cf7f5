"""Worst-case bias bounds from sensitivity parameters.

Each bias term is a sum of covariances, and each covariance is capped by
``|rho| * sigma * sigma`` with every factor bounded by a user belief:

* outcome spreads by Popoviciu's inequality, scaled by an ``eta`` in [0, 1];
* the weighting-score spread either by ``eta_eps`` times the data-driven
  ceiling ``sqrt(E[(1 - p~_a) / p~_a | S=1])`` or by the Bhatia-Davis bound
  ``sqrt(alpha - 2 + 1/alpha)`` when the score is known to lie in
  ``[1/alpha, alpha]``;
* exposure-probability gaps by ``beta``, or per level by ``zeta``.

All arithmetic is closed form.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError
from .estimate import naive_functional_psi, naive_ipw_estimate, pseudo_propensity

UNIT_FIELDS = ("eta_baseline", "eta_eps", "rho_baseline", "eta_gamma", "rho_spillover",
               "eta_tau", "beta", "rho_transport", "eta_upsilon")
SIGN_KEYS = ("t1_a0", "t1_a1", "t2_a0", "t2_a1", "t3", "gap")


@dataclass(frozen=True)
class SensitivityParams:
    """User beliefs about the unidentified pieces of the bias.

    ``signs`` optionally fixes the sign of individual bias contributions:
    keys from :data:`SIGN_KEYS`, values +1 or -1.  Unlisted terms are
    treated adversarially.  ``gamma_range`` and ``tau_range`` override the
    shared ``[x_min_ref, x_max_ref]`` range for spillover and main effects.
    """

    eta_baseline: float = 0.0
    eta_eps: float | None = None
    rho_baseline: float = 0.0
    eta_gamma: float = 0.0
    rho_spillover: float = 0.0
    eta_tau: float = 0.0
    beta: float = 0.0
    rho_transport: float = 0.0
    y_min_ref: float = 0.0
    y_max_ref: float = 0.0
    x_min_ref: float = 0.0
    x_max_ref: float = 0.0
    alpha0: float | None = None
    alpha1: float | None = None
    zeta: tuple | None = None
    eta_upsilon: float | None = None
    signs: dict = field(default_factory=dict)
    gamma_range: tuple | None = None
    tau_range: tuple | None = None

    def __post_init__(self):
        for name in UNIT_FIELDS:
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise InputDomainError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.y_min_ref <= self.y_max_ref:
            raise InputDomainError("y_min_ref must not exceed y_max_ref")
        if not self.x_min_ref <= self.x_max_ref:
            raise InputDomainError("x_min_ref must not exceed x_max_ref")
        for name in ("gamma_range", "tau_range"):
            r = getattr(self, name)
            if r is not None:
                if len(r) != 2 or not r[0] <= r[1]:
                    raise InputDomainError(f"{name} must be an ordered pair")
                object.__setattr__(self, name, (float(r[0]), float(r[1])))
        alphas = (self.alpha0, self.alpha1)
        if (self.alpha0 is None) != (self.alpha1 is None):
            raise InputDomainError("alpha0 and alpha1 must be given together")
        if self.alpha0 is not None:
            if self.eta_eps is not None:
                raise InputDomainError("set either eta_eps or alpha0/alpha1, not both")
            for a in alphas:
                if not a >= 1.0:
                    raise InputDomainError("alpha values must be >= 1")
        if self.zeta is not None:
            if self.eta_upsilon is None:
                raise InputDomainError("zeta requires eta_upsilon")
            z = tuple(float(v) for v in np.atleast_1d(self.zeta))
            if any(not -1.0 <= v <= 1.0 for v in z):
                raise InputDomainError("zeta entries must lie in [-1, 1]")
            object.__setattr__(self, "zeta", z)
        signs = dict(self.signs or {})
        for key, val in signs.items():
            if key not in SIGN_KEYS or val not in (1, -1):
                raise InputDomainError(f"bad sign entry {key!r}: {val!r}")
        object.__setattr__(self, "signs", signs)

    @property
    def uses_alpha(self):
        return self.alpha0 is not None

    @property
    def gamma_bounds(self):
        return self.gamma_range or (self.x_min_ref, self.x_max_ref)

    @property
    def tau_bounds(self):
        return self.tau_range or (self.x_min_ref, self.x_max_ref)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("zeta", "gamma_range", "tau_range"):
            if d[key] is not None:
                d[key] = list(d[key])
        return {k: v for k, v in d.items() if v is not None and v != {}}

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InputDomainError(f"unknown sensitivity parameters {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class DataSummary:
    """Observed-data inputs to the bounds.

    ``mean_inv_odds[a]`` is ``E[(1 - p~_a) / p~_a | S=1]`` where ``p~_a`` is
    the pseudo-propensity of arm ``a``.
    """

    mean_inv_odds: tuple
    psi_hat: float | None = None
    g_max: int = 0
    provenance: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.mean_inv_odds)
        if len(vals) != 2:
            raise InputDomainError("mean_inv_odds needs one value per arm")
        if any(not (math.isfinite(v) and v >= 0) for v in vals):
            raise InputDomainError("mean_inv_odds values must be finite and >= 0")
        if int(self.g_max) != self.g_max or self.g_max < 0:
            raise InputDomainError("g_max must be a non-negative integer")
        object.__setattr__(self, "mean_inv_odds", vals)

    @classmethod
    def from_pscores(cls, pscores, psi_hat=None, g_max=0, provenance="pseudo-propensity scores"):
        """Summary from the pseudo-propensity scores of reference units."""
        p = np.asarray(pscores, dtype=np.float64)
        if p.size == 0 or np.any((p <= 0) | (p >= 1)):
            raise InputDomainError("pseudo-propensity scores must be non-empty and strictly inside (0, 1)")
        return cls((float(np.mean(p / (1 - p))), float(np.mean((1 - p) / p))), psi_hat, g_max, provenance)

    @classmethod
    def from_measure(cls, measure, spec=None):
        """Exact summary under a population measure."""
        ref = measure.event(s=1)
        p = pseudo_propensity(measure)
        with np.errstate(divide="ignore", invalid="ignore"):
            odds0 = np.where(ref, p / (1 - p), 0.0)
            odds1 = np.where(ref, (1 - p) / p, 0.0)
        return cls((measure.expect(odds0, ref), measure.expect(odds1, ref)), naive_functional_psi(measure),
                   measure.g_max, f"exact ({measure.provenance})")

    @classmethod
    def from_sample(cls, sample, g_max=0):
        """Stratum-frequency (or supplied) scores and the plug-in estimate."""
        a = np.asarray(sample.a)
        s = np.ones_like(a) if sample.s is None else np.asarray(sample.s)
        ref = s == 1
        if sample.pscore_pseudo is not None:
            p = np.asarray(sample.pscore_pseudo, dtype=np.float64)[ref]
        else:
            strata = np.asarray(sample.stratum)[ref]
            codes, inv = np.unique(strata, return_inverse=True)
            freq = np.bincount(inv, weights=a[ref]) / np.bincount(inv)
            p = freq[inv]
        return cls.from_pscores(p, naive_ipw_estimate(sample), g_max, "observed sample")

    def to_dict(self):
        return {"mean_inv_odds": list(self.mean_inv_odds), "psi_hat": self.psi_hat, "g_max": self.g_max,
                "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["mean_inv_odds"]), d.get("psi_hat"), int(d.get("g_max", 0)), d.get("provenance", ""))


def sigma_eps_upper(summary, eta_eps, arm):
    """Ceiling on the spread of the arm-``arm`` weighting score."""
    if not 0.0 <= eta_eps <= 1.0:
        raise InputDomainError("eta_eps must lie in [0, 1]")
    value = summary.mean_inv_odds[arm] if isinstance(summary, DataSummary) else float(summary)
    if value < 0:
        raise InputDomainError("summary value must be non-negative")
    return eta_eps * math.sqrt(value)


def sigma_eps_from_alpha(alpha):
    """Bhatia-Davis ceiling for a mean-one score supported on ``[1/alpha, alpha]``."""
    if not alpha >= 1.0:
        raise InputDomainError("alpha must be >= 1")
    return math.sqrt(max(alpha - 2.0 + 1.0 / alpha, 0.0))


def _sigma_eps_bars(params, summary):
    if params.uses_alpha:
        return sigma_eps_from_alpha(params.alpha0), sigma_eps_from_alpha(params.alpha1)
    if params.eta_eps is None:
        raise InputDomainError("set eta_eps or alpha0/alpha1 to bound the weighting-score spread")
    if summary is None:
        raise InputDomainError("eta_eps needs a data summary")
    return tuple(sigma_eps_upper(summary, params.eta_eps, a) for a in (0, 1))


def _arm_terms(params, summary, which):
    bars = _sigma_eps_bars(params, summary)
    if which == "t1":
        rho, eta, (lo, hi) = params.rho_baseline, params.eta_baseline, (params.y_min_ref, params.y_max_ref)
    else:
        rho, eta, (lo, hi) = params.rho_spillover, params.eta_gamma, params.gamma_bounds
    if rho == 0 or eta == 0 or hi == lo:
        return [0.0, 0.0]
    return [rho * (eta / 2.0) * (hi - lo) * bars[a] for a in (0, 1)]


def t1_bound(params, summary=None):
    """Cap on the baseline-outcome confounding term."""
    return math.fsum(_arm_terms(params, summary, "t1"))


def t2_bound(params, summary=None):
    """Cap on the confounding-by-spillover term."""
    return math.fsum(_arm_terms(params, summary, "t2"))


def _t3_parts(params, g_max):
    levels = g_max + 1
    lo, hi = params.tau_bounds
    spread = (params.eta_tau / 2.0) * (hi - lo)
    extreme = max(abs(lo), abs(hi))
    if params.zeta is not None:
        if len(params.zeta) != levels:
            raise InputDomainError(f"zeta needs {levels} entries, got {len(params.zeta)}")
        cov = [params.rho_transport * spread * params.eta_upsilon * math.sqrt(max(1.0 - z * z, 0.0))
               for z in params.zeta]
        gap = [extreme * abs(z) for z in params.zeta]
    else:
        cov = [params.rho_transport * spread * params.beta] * levels
        gap = [extreme * params.beta] * levels
    return cov, gap


def t3_bound(params, g_max=None, summary=None):
    """Cap on the transport term, summed over exposure levels.

    ``g_max`` defaults to the summary's value.  The zeta form takes the
    per-level mean gap ``zeta(g)`` and presumes the gap lies in [-1, 1].
    """
    if g_max is None:
        if summary is None:
            raise InputDomainError("t3_bound needs g_max or a data summary")
        g_max = summary.g_max
    cov, gap = _t3_parts(params, int(g_max))
    return math.fsum(cov) + math.fsum(gap)


@dataclass(frozen=True)
class BiasBound:
    t1_bound: float
    t2_bound: float
    t3_bound: float
    total: float
    lower: float
    upper: float
    adjusted_lower: float | None
    adjusted_upper: float | None
    kill: bool | None
    psi_hat: float | None
    transport: bool

    def to_dict(self):
        return dataclasses.asdict(self)


def _interval(pieces, signs):
    lower, upper = [], []
    for key, cap in pieces:
        sign = signs.get(key)
        if sign is None:
            lower.append(-cap)
            upper.append(cap)
        elif sign > 0:
            upper.append(cap)
        else:
            lower.append(-cap)
    return math.fsum(lower), math.fsum(upper)


def worst_case_bias(params, summary=None, transport=False, g_max=None):
    """Assemble the per-term caps into a bias bound.

    Bias here is naive functional minus target estimand, so the adjusted
    interval for the target is ``[psi_hat - upper, psi_hat - lower]``.  A
    fixed sign for a term keeps only its side of the interval; the arm
    signs refer to the term's contribution to the bias, already including
    the arm's alternating sign.
    """
    t1 = _arm_terms(params, summary, "t1")
    t2 = _arm_terms(params, summary, "t2")
    pieces = [("t1_a0", t1[0]), ("t1_a1", t1[1]), ("t2_a0", t2[0]), ("t2_a1", t2[1])]
    t3 = 0.0
    if transport:
        if g_max is None:
            if summary is None:
                raise InputDomainError("the transport bound needs g_max or a data summary")
            g_max = summary.g_max
        cov, gap = _t3_parts(params, int(g_max))
        pieces += [("t3", math.fsum(cov)), ("gap", math.fsum(gap))]
        t3 = math.fsum(cov) + math.fsum(gap)
    total = math.fsum(cap for _, cap in pieces)
    lower, upper = _interval(pieces, params.signs)
    psi = None if summary is None else summary.psi_hat
    if psi is None:
        adj_lo = adj_hi = kill = None
    else:
        adj_lo, adj_hi = psi - upper, psi - lower
        kill = bool(total >= abs(psi))
    return BiasBound(math.fsum(t1), math.fsum(t2), t3, total, lower, upper, adj_lo, adj_hi, kill, psi, bool(transport))


CONTOUR_FIELDS = UNIT_FIELDS + ("alpha0", "alpha1", "y_min_ref", "y_max_ref", "x_min_ref", "x_max_ref")


def parse_axis(text):
    """Parse ``name:lo:hi:steps``."""
    parts = text.split(":")
    if len(parts) != 4:
        raise InputDomainError(f"axis {text!r} is not of the form name:lo:hi:steps")
    name, lo, hi, steps = parts
    try:
        return name, float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise InputDomainError(f"axis {text!r}: {exc}") from None


def contour_grid(params, summary, axis1, axis2, transport=False, g_max=None):
    """Bound over a two-parameter grid, first axis outermost.

    Returns a list of ``(value1, value2, total, kill)`` rows.
    """
    axes = []
    for name, lo, hi, steps in (axis1, axis2):
        if name not in CONTOUR_FIELDS:
            raise InputDomainError(f"cannot vary {name!r}; choose from {CONTOUR_FIELDS}")
        if int(steps) < 2:
            raise InputDomainError("each axis needs at least 2 steps")
        axes.append((name, np.linspace(lo, hi, int(steps))))
    if axes[0][0] == axes[1][0]:
        raise InputDomainError("the two axes must vary different parameters")
    (n1, v1), (n2, v2) = axes
    rows = []
    for x in v1:
        for y in v2:
            b = worst_case_bias(params.replace(**{n1: float(x), n2: float(y)}), summary, transport, g_max)
            rows.append((float(x), float(y), b.total, b.kill))
    return rows
