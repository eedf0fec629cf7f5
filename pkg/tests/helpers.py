"""Small hand-built scenarios shared across test modules."""

import numpy as np

from spillsense.measure import ROLES
from spillsense.scenario import ScenarioSpec


def tiny_spec(g_max=1, blocks=None, propensity=(0.3, 0.6), **kw):
    """Scenario with absent blocks unless given; tables may be passed compact.

    ``propensity`` is the per-population value when no other A-parents
    exist; pass ``propensity_table`` for anything richer.
    """
    levels = g_max + 1
    size = {r: len((blocks or {}).get(r, [1.0])) for r in ROLES}
    ex_shape = (2,) + tuple(size[r] for r in ("X_AG", "U_AG", "X_GY", "U_GY", "X_GS", "U_GS")) + (levels,)
    out_shape = (2, levels) + tuple(size[r] for r in ("X_AY", "U_AY", "X_GY", "U_GY"))
    base_outcome = np.arange(2 * levels, dtype=float).reshape((2, levels) + (1,) * 4)
    return ScenarioSpec.build(
        blocks=blocks,
        selection=kw.pop("selection", 0.5),
        propensity=kw.pop("propensity_table", np.asarray(propensity)),
        exposure=kw.pop("exposure", np.full(ex_shape, 1.0 / levels)),
        outcome=kw.pop("outcome", np.broadcast_to(base_outcome, out_shape)),
        g_max=g_max,
        **kw,
    )


def outcome_from(spec_like_fn, g_max=1, blocks=None, **kw):
    """Scenario whose outcome table is ``f(a, g)`` broadcast over covariates."""
    levels = g_max + 1
    size = {r: len((blocks or {}).get(r, [1.0])) for r in ROLES}
    a, g = np.meshgrid([0, 1], np.arange(levels), indexing="ij")
    base = np.asarray(spec_like_fn(a, g), dtype=float).reshape((2, levels) + (1,) * 4)
    out_shape = (2, levels) + tuple(size[r] for r in ("X_AY", "U_AY", "X_GY", "U_GY"))
    return tiny_spec(g_max, blocks, outcome=np.broadcast_to(base, out_shape), **kw)
