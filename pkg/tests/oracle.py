"""Independent reference computations used as test oracles.

Everything here walks the scenario's factor tables with plain Python loops
and dictionaries; nothing is shared with the library's vectorized
enumeration or its measure class.
"""

import itertools
import math

import numpy as np

from spillsense.measure import ROLES


def brute_states(spec):
    """All positive-weight joint states as ``(state_dict, weight)`` pairs."""
    free = [r for r in ROLES if r not in spec.aliases]
    supports = [range(spec.blocks[r].shape[0]) for r in free]
    n_values = range(spec.levels) if spec.undefined_po else [None]
    out = []
    for combo in itertools.product(*supports):
        x = dict(zip(free, combo))
        for role, target in spec.aliases.items():
            x[role] = x[target]
        w_cov = 1.0
        for r in free:
            w_cov *= float(spec.blocks[r][x[r]])
        p1 = float(spec.selection[x["X_AS"], x["U_AS"], x["X_GS"], x["U_GS"]])
        for s in (1, 2):
            w_s = w_cov * (p1 if s == 1 else 1.0 - p1)
            prop = float(spec.propensity[s - 1, x["X_AY"], x["U_AY"], x["X_AG"], x["U_AG"], x["X_AS"], x["U_AS"]])
            for n in n_values:
                w_n = w_s if n is None else w_s * float(spec.degree[s - 1, n])
                blk = (x["X_AG"], x["U_AG"], x["X_GY"], x["U_GY"], x["X_GS"], x["U_GS"])
                row = spec.exposure[(s - 1,) + blk] if n is None else spec.exposure[(s - 1, n) + blk]
                for a in (0, 1):
                    w_a = w_n * (prop if a == 1 else 1.0 - prop)
                    for g in range(spec.levels):
                        w = w_a * float(row[g])
                        if w > 0:
                            st = dict(x, s=s, a=a, g=g, n=n, prop=prop)
                            out.append((st, w))
    return out


def y_of(spec, st, a, g):
    return float(spec.outcome[a, g, st["X_AY"], st["U_AY"], st["X_GY"], st["U_GY"]])


def cond_mean(states, f, pred):
    num = math.fsum(w * f(st) for st, w in states if pred(st))
    den = math.fsum(w for st, w in states if pred(st))
    return num / den


def pseudo_by_stratum(states):
    num, den = {}, {}
    for st, w in states:
        if st["s"] == 1:
            k = st["X_AY"]
            num[k] = num.get(k, 0.0) + w * st["a"]
            den[k] = den.get(k, 0.0) + w
    return {k: num[k] / den[k] for k in den}


def brute_psi(spec, states=None):
    states = states or brute_states(spec)
    pt = pseudo_by_stratum(states)

    def contrib(st):
        p = pt[st["X_AY"]]
        y = y_of(spec, st, st["a"], st["g"])
        return y / p if st["a"] == 1 else -y / (1.0 - p)

    return cond_mean(states, contrib, lambda st: st["s"] == 1)


def brute_phi(spec, s, states=None):
    states = states or brute_states(spec)
    return cond_mean(states, lambda st: y_of(spec, st, 1, st["g"]) - y_of(spec, st, 0, st["g"]),
                     lambda st: st["s"] == s)


def brute_cov(states, f, h, pred):
    ef = cond_mean(states, f, pred)
    eh = cond_mean(states, h, pred)
    return cond_mean(states, lambda st: (f(st) - ef) * (h(st) - eh), pred)


def brute_t1_t2(spec, states=None):
    states = states or brute_states(spec)
    pt = pseudo_by_stratum(states)
    ref = lambda st: st["s"] == 1  # noqa: E731

    def eps(a):
        def f(st):
            p = pt[st["X_AY"]]
            return st["prop"] / p if a == 1 else (1.0 - st["prop"]) / (1.0 - p)
        return f

    t1 = t2 = 0.0
    for a in (0, 1):
        sign = 1.0 if a == 1 else -1.0
        t1 += sign * brute_cov(states, lambda st, a=a: y_of(spec, st, a, 0), eps(a), ref)
        t2 += sign * brute_cov(states, lambda st, a=a: y_of(spec, st, a, st["g"]) - y_of(spec, st, a, 0),
                               eps(a), ref)
    return t1, t2


def ceil6(x):
    """Round up at the sixth decimal, capped at 1."""
    return min(1.0, math.ceil(x * 1e6 - 1e-9) / 1e6) if x > 0 else 0.0


def outcome_ranges(spec):
    """Baseline range and the shared range of spillover and main effects."""
    y = spec.outcome
    base = y[:, 0]
    gamma = y - y[:, :1]
    tau = y[1] - y[0]
    x = np.concatenate([gamma.ravel(), tau.ravel()])
    return (float(base.min()), float(base.max())), (float(x.min()), float(x.max()))


def _ratio(sigma, lo, hi):
    half = (hi - lo) / 2.0
    return 0.0 if half <= 0 else sigma / half


def oracle_params(spec, breakdown, summary, transport=False):
    """Sensitivity parameters set to a scenario's true spreads and correlations."""
    from spillsense.bounds import SensitivityParams

    (ylo, yhi), (xlo, xhi) = outcome_ranges(spec)
    t1, t2 = breakdown.t1, breakdown.t2
    eta_eps = max(
        c.sigma_right / math.sqrt(summary.mean_inv_odds[c.index["a"]]) if summary.mean_inv_odds[c.index["a"]] > 0
        else 0.0
        for c in t1
    )
    kw = dict(
        eta_baseline=ceil6(max(_ratio(c.sigma_left, ylo, yhi) for c in t1)),
        rho_baseline=ceil6(max(abs(c.rho) for c in t1)),
        eta_gamma=ceil6(max(_ratio(c.sigma_left, xlo, xhi) for c in t2)),
        rho_spillover=ceil6(max(abs(c.rho) for c in t2)),
        eta_eps=ceil6(eta_eps),
        y_min_ref=ylo, y_max_ref=yhi, x_min_ref=xlo, x_max_ref=xhi,
    )
    if transport:
        t3 = breakdown.t3
        kw.update(
            eta_tau=ceil6(max(_ratio(c.sigma_left, xlo, xhi) for c in t3)),
            rho_transport=ceil6(max(abs(c.rho) for c in t3)),
            beta=ceil6(max(max(abs(c.marginal_gap) for c in t3), max(c.sigma_right for c in t3))),
        )
    return SensitivityParams(**kw)
