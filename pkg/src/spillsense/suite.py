"""The identity suite: every exact relation the decompositions must satisfy.

Each check returns the absolute residual of one identity on one scenario,
or ``None`` with a note when the identity does not apply.
"""

from dataclasses import dataclass, field

import numpy as np

from .decompose import bias_phi1, bias_phi2, bias_undefined, check_corollary, shen_decomposition, t3_theta
from .estimate import ipw_identify, mew_scores, oracle_estimands
from .scenario import enumeration_measure, random_scenario, transport_violations

IDENTITIES = (
    "bias_reference",      # psi - phi1 = T1 + T2
    "ipw_identification",  # IPW with true scores = phi_s, both populations
    "mew_mean",            # E[eps_a | S=1] = 1
    "bias_target",         # psi - phi2 = T1 + T2 + T3
    "bias_theta",          # psi - theta = T1 + T2 + T3_theta
    "corollary",           # T3 collapses to one part under either branch
    "additive_outcome",    # additive outcome => T3 = 0
    "separable_interaction",  # f3(a, g) interaction => T3_theta = 0
    "no_interference",     # g_max = 0 => T2 = 0 and the two-term form
    "undefined_po",        # both stratified identities with ragged N
)


def outcome_is_additive(spec, tol=1e-12):
    """Individual main effect does not vary with the exposure level."""
    tau = spec.outcome[1] - spec.outcome[0]
    return bool(np.all(np.abs(tau - tau[:1]) <= tol))


def outcome_has_separable_interaction(spec, tol=1e-12):
    """Exposure-driven change in the main effect is the same for every covariate cell."""
    tau = spec.outcome[1] - spec.outcome[0]
    shift = (tau - tau[:1]).reshape(spec.levels, -1)
    return bool(np.all(np.abs(shift - shift[:, :1]) <= tol))


@dataclass
class CheckResult:
    residuals: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)


def check_scenario(spec, measure=None):
    """Run every applicable identity on one scenario."""
    m = measure if measure is not None else enumeration_measure(spec)
    out = CheckResult()
    res, notes = out.residuals, out.notes
    both = sorted(m.populations()) == [1, 2]
    transportable = both and not transport_violations(spec)

    if m.undefined_po:
        bd = bias_undefined(m, spec if transportable else None)
        keys = ("bias_phi1", "bias_phi2") if transportable else ("bias_phi1",)
        res["undefined_po"] = max(abs(bd.residuals[k]) for k in keys)
        res["bias_reference"] = abs(bd.residuals["bias_phi1"])
    else:
        bd = bias_phi2(m, spec) if transportable else bias_phi1(m, spec)
        res["bias_reference"] = abs(bd.residuals["bias_phi1"])
        notes["undefined_po"] = "scenario has no degree table"

    oracle = oracle_estimands(m)
    res["ipw_identification"] = max(abs(ipw_identify(m, s=s) - oracle.phi[s]) for s in m.populations())
    ref = m.event(s=1)
    eps = mew_scores(m)
    res["mew_mean"] = max(abs(m.expect(e, ref) - 1.0) for e in eps)

    if not transportable:
        reason = "only one population has mass" if not both else "transport structure violated"
        for key in ("bias_target", "bias_theta", "corollary", "additive_outcome", "separable_interaction"):
            notes[key] = reason
    else:
        res["bias_target"] = abs(bd.residuals["bias_phi2"])
        if m.undefined_po:
            for key in ("bias_theta", "corollary", "additive_outcome", "separable_interaction"):
                notes[key] = "defined for well-defined potential outcomes only"
        else:
            th = t3_theta(m, spec, bd)
            res["bias_theta"] = abs(th.residual)
            cor = check_corollary(m, spec, breakdown=bd)
            if cor.equal_marginals or cor.randomized:
                res["corollary"] = cor.max_residual
            notes["corollary"] = cor.message
            if outcome_is_additive(spec):
                res["additive_outcome"] = abs(bd.T3)
            else:
                notes["additive_outcome"] = "outcome is not additive"
            if outcome_has_separable_interaction(spec):
                res["separable_interaction"] = abs(th.total)
            else:
                notes["separable_interaction"] = "interaction is not separable"

    if spec.g_max == 0 and not m.undefined_po:
        _, shen = shen_decomposition(m, spec)
        res["no_interference"] = max(abs(bd.T2), abs(shen - bd.direct["bias_phi1"]))
    else:
        notes["no_interference"] = "g_max > 0" if spec.g_max else "undefined-outcome scenario"
    return out


VARIANTS = (
    ("general", {}),
    ("additive", {"outcome_form": "additive"}),
    ("separable", {"outcome_form": "separable"}),
    ("equal_marginals", {"exposure_form": "equal_marginals"}),
    ("randomized", {"exposure_form": "randomized"}),
    ("no_interference", {"g_max": 0}),
    ("undefined_po", {"undefined_po": True}),
)


def derived_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


@dataclass
class SuiteReport:
    max_residual: dict
    counts: dict
    scenarios: int
    tolerance: float
    worst: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(v <= self.tolerance for v in self.max_residual.values())

    def lines(self):
        out = [f"{'identity':<24}{'checked':>8}  {'max residual':>14}  status"]
        for name in IDENTITIES:
            n = self.counts.get(name, 0)
            if n == 0:
                out.append(f"{name:<24}{0:>8}  {'-':>14}  n/a")
                continue
            v = self.max_residual[name]
            out.append(f"{name:<24}{n:>8}  {v:>14.3e}  {'ok' if v <= self.tolerance else 'FAIL'}")
        return out

    def to_dict(self):
        return {"ok": self.ok, "tolerance": self.tolerance, "scenarios": self.scenarios,
                "max_residual": self.max_residual, "counts": self.counts, "worst": self.worst}


def _accumulate(report, label, result):
    for name, v in result.residuals.items():
        v = float(v) if np.isfinite(v) else float("inf")
        report.counts[name] = report.counts.get(name, 0) + 1
        if v > report.max_residual.get(name, -1.0):
            report.max_residual[name] = v
            report.worst[name] = label


def run_suite(specs, tolerance=1e-9):
    """Run :func:`check_scenario` over ``(label, spec)`` pairs."""
    report = SuiteReport({}, {}, 0, tolerance)
    for label, spec in specs:
        _accumulate(report, label, check_scenario(spec))
        report.scenarios += 1
    return report


def random_specs(count, seed):
    """Seeded random scenarios of every variant, ``count`` of each."""
    for i in range(int(count)):
        for name, kwargs in VARIANTS:
            s = derived_seed(seed, i)
            yield f"{name}#{i} (seed {s})", random_scenario(s, **kwargs)
