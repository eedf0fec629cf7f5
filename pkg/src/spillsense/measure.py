"""Finite probability measures over fully specified atoms.

A :class:`PopulationMeasure` is the expectation operator that every estimand,
score and bias term is computed against.  Atoms carry the covariate roles,
population ``s`` (1 = reference, 2 = target), personal treatment ``a``,
exposure level ``g`` and, in undefined-outcome mode, neighbor count ``n``.
Potential outcomes are held in a row table shared between atoms.
"""

import numpy as np

from . import _kernels
from .errors import InputDomainError, UndefinedStratumError

ROLES = ("X_AY", "U_AY", "X_GY", "U_GY", "X_AG", "U_AG", "X_AS", "U_AS", "X_GS", "U_GS")
PROVENANCES = ("enumeration", "configuration_conditional", "empirical_sample")

# roles the naive analyst adjusts for, and the full A-adjustment set
PSEUDO_ROLES = ("X_AY",)
TRUE_PROPENSITY_ROLES = ("X_AY", "U_AY", "X_AG", "U_AG", "X_AS", "U_AS")
OUTCOME_ROLES = ("X_AY", "U_AY", "X_GY", "U_GY")
EXPOSURE_OUTCOME_ROLES = ("X_GY", "U_GY")


class PopulationMeasure:
    """Weighted atoms plus the potential-outcome table they index.

    Parameters
    ----------
    columns : dict of str -> int array
        One entry per role in :data:`ROLES` plus ``s``, ``a``, ``g`` and
        optionally ``n`` and ``unit``.
    weights : float array
        Non-negative, summing to one within 1e-9.  Zero-weight atoms are dropped.
    prop_true : float array
        ``p(A=1 | S, X~, U~)`` at each atom.
    po_table : array of shape (rows, 2, g_max + 1)
        Potential outcomes ``Y^(a,g)``; NaN marks undefined entries.
    po_row : int array
        Row of ``po_table`` for each atom.
    supports : dict of str -> int
        Support size of each role column.
    g_mode : {"tabular", "structural"}
        Whether exposure was drawn from a table or realized on a graph.
    """

    def __init__(self, columns, weights, prop_true, po_table, po_row, g_max, provenance,
                 supports, undefined_po=False, g_mode="tabular"):
        if provenance not in PROVENANCES:
            raise InputDomainError(f"unknown provenance {provenance!r}")
        w = np.asarray(weights, dtype=np.float64)
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InputDomainError("measure weights must be finite and non-negative")
        total = _kernels.compensated_sum(w)
        if abs(total - 1.0) > 1e-9:
            raise InputDomainError(f"measure weights sum to {total!r}, not 1")
        keep = w > 0
        self.weights = w[keep]
        self.columns = {k: np.asarray(v)[keep] for k, v in columns.items()}
        for key in ROLES + ("s", "a", "g"):
            if key not in self.columns:
                raise InputDomainError(f"measure is missing column {key!r}")
        self.prop_true = np.asarray(prop_true, dtype=np.float64)[keep]
        self.po_table = np.asarray(po_table, dtype=np.float64)
        self.po_row = np.asarray(po_row, dtype=np.int64)[keep]
        self.g_max = int(g_max)
        self.provenance = provenance
        self.supports = {r: int(supports[r]) for r in ROLES}
        self.undefined_po = bool(undefined_po)
        self.g_mode = g_mode
        if self.undefined_po and "n" not in self.columns:
            raise InputDomainError("undefined-PO measures need an 'n' column")
        if self.po_table.shape[1:] != (2, self.g_max + 1):
            raise InputDomainError("po_table must have shape (rows, 2, g_max + 1)")

    def __len__(self):
        return self.weights.shape[0]

    @property
    def exact(self):
        return self.provenance != "empirical_sample"

    def __getitem__(self, name):
        return self.columns[name]

    def event(self, **conditions):
        """Boolean mask of atoms where every ``column == value`` holds."""
        mask = np.ones(len(self), dtype=bool)
        for name, value in conditions.items():
            mask &= self.columns[name] == value
        return mask

    def probability(self, mask=None):
        if mask is None:
            return 1.0
        return _kernels.compensated_sum(self.weights[mask])

    def expect(self, values, given=None):
        """``E[values | given]``; zero-mass conditioning raises."""
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), self.weights.shape)
        if given is None:
            w, x = self.weights, values
        else:
            w, x = self.weights[given], values[given]
        mass = _kernels.compensated_sum(w)
        if not mass > 0:
            raise UndefinedStratumError("conditioning event has zero probability mass")
        return _kernels.compensated_sum(w * x) / mass

    def moments(self, x, y, given=None):
        """Two-pass ``(cov, sd_x, sd_y)`` of ``x`` and ``y`` given an event."""
        x = np.broadcast_to(np.asarray(x, dtype=np.float64), self.weights.shape)
        y = np.broadcast_to(np.asarray(y, dtype=np.float64), self.weights.shape)
        if given is not None:
            w, x, y = self.weights[given], x[given], y[given]
        else:
            w = self.weights
        mass = _kernels.compensated_sum(w)
        if not mass > 0:
            raise UndefinedStratumError("conditioning event has zero probability mass")
        dx = x - _kernels.compensated_sum(w * x) / mass
        dy = y - _kernels.compensated_sum(w * y) / mass
        cov = _kernels.compensated_sum(w * dx * dy) / mass
        vx = _kernels.compensated_sum(w * dx * dx) / mass
        vy = _kernels.compensated_sum(w * dy * dy) / mass
        return cov, np.sqrt(max(vx, 0.0)), np.sqrt(max(vy, 0.0))

    def stratum_keys(self, names):
        """Mixed-radix integer key per atom for the listed columns."""
        key = np.zeros(len(self), dtype=np.int64)
        radix = 1
        for name in names:
            size = self.supports[name] if name in self.supports else int(self.columns[name].max()) + 1
            key = key + self.columns[name].astype(np.int64) * radix
            radix *= size
        return key, radix

    def conditional_mean(self, values, by, given=None, spread=False):
        """Per-atom ``E[values | by-stratum, given]``.

        Atoms whose stratum has no mass inside ``given`` get NaN, as do atoms
        outside ``given`` unless ``spread`` is set, in which case the value is
        evaluated at every atom as a function of its stratum.
        """
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), self.weights.shape)
        key, n_groups = self.stratum_keys(by)
        mask = np.ones(len(self), dtype=bool) if given is None else given
        w = np.where(mask, self.weights, 0.0)
        num = _kernels.group_compensated_sum(key, w * np.where(mask, values, 0.0), n_groups)
        den = _kernels.group_compensated_sum(key, w, n_groups)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
        out = ratio[key]
        if not spread:
            out[~mask] = np.nan
        return out

    def potential_outcome(self, a, g):
        return self.po_table[self.po_row, a, g]

    def observed_outcome(self):
        return self.po_table[self.po_row, self.columns["a"], self.columns["g"]]

    def defined(self, g):
        """Indicator V_g: the potential outcomes at level ``g`` exist."""
        if not self.undefined_po:
            return np.ones(len(self), dtype=bool)
        return self.columns["n"] >= g

    def populations(self):
        return sorted(int(s) for s in np.unique(self.columns["s"]))

    def population_weights(self):
        return {s: self.probability(self.event(s=s)) for s in self.populations()}
