"""Discrete, table-driven data-generating scenarios and exact enumeration.

A scenario draws ten mutually independent categorical covariate blocks, then
population membership ``S`` from the selection table, personal treatment ``A``
from the propensity table, the exposure level ``G`` from the exposure table
and reads the potential outcome ``Y^(a,g)`` off the outcome table.  In
undefined-outcome mode a neighbor count ``N`` is drawn from ``p(N | S)`` and
the exposure table gains an ``N`` axis with support restricted to ``0..n``.

Tables are numpy arrays whose axes follow a fixed parent order:

==========  ===========================================================
selection   ``p(S=1 | X_AS, U_AS, X_GS, U_GS)``
propensity  ``p(A=1 | S, X_AY, U_AY, X_AG, U_AG, X_AS, U_AS)``
exposure    ``p(G=g | S, [N], X_AG, U_AG, X_GY, U_GY, X_GS, U_GS)``, last axis g
outcome     ``y(a, g, X_AY, U_AY, X_GY, U_GY)``
degree      ``p(N=n | S)``
==========  ===========================================================

The ``S`` axis is indexed 0 for the reference population (S=1) and 1 for
the target (S=2).
"""

import os
import string
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    EnumerationSizeError,
    InputDomainError,
    ScenarioValidationError,
    StructuralError,
    UndefinedStratumError,
)
from .measure import OUTCOME_ROLES, ROLES, TRUE_PROPENSITY_ROLES, PopulationMeasure

SELECTION_PARENTS = ("X_AS", "U_AS", "X_GS", "U_GS")
PROPENSITY_PARENTS = ("S",) + TRUE_PROPENSITY_ROLES
EXPOSURE_BLOCKS = ("X_AG", "U_AG", "X_GY", "U_GY", "X_GS", "U_GS")
OUTCOME_AXES = ("A", "G") + OUTCOME_ROLES

DEFAULT_MAX_STATES = 10**7
ROW_TOL = 1e-9

# aliasing a role that drives the outcome to one of these breaks transport
_Y_ROLES = {"X_AY", "U_AY", "X_GY", "U_GY"}
_S_ROLES = {"X_AS", "U_AS", "X_GS", "U_GS"}
_G_ROLES = {"X_AG", "U_AG", "X_GS", "U_GS"}


def max_states():
    """Enumeration cap; ``SPILLSENSE_MAX_STATES`` overrides the default."""
    raw = os.environ.get("SPILLSENSE_MAX_STATES")
    return int(raw) if raw else DEFAULT_MAX_STATES


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Immutable discrete scenario.  Build with :meth:`build`.

    ``aliases`` maps a role to another role whose value it copies, which is
    how overlapping covariate categories are expressed; the aliased role's
    own pmf is ignored.
    """

    blocks: dict
    selection: np.ndarray
    propensity: np.ndarray
    exposure: np.ndarray
    outcome: np.ndarray
    g_max: int
    degree: np.ndarray | None = None
    aliases: dict = field(default_factory=dict)

    @classmethod
    def build(cls, *, selection, propensity, exposure, outcome, g_max, blocks=None,
              degree=None, aliases=None):
        """Normalize inputs into a spec without judging their validity.

        Missing blocks are treated as absent (support 1).  Tables may omit
        the axes of absent blocks; those axes are reinserted here.
        """
        blocks = dict(blocks or {})
        unknown = set(blocks) - set(ROLES)
        if unknown:
            raise InputDomainError(f"unknown covariate roles {sorted(unknown)}")
        aliases = dict(aliases or {})
        norm = {r: np.atleast_1d(np.asarray(blocks.get(r, [1.0]), dtype=np.float64)) for r in ROLES}
        spec = cls(norm, None, None, None, None, int(g_max),
                   None if degree is None else np.asarray(degree, dtype=np.float64), aliases)
        for name, value in (("selection", selection), ("propensity", propensity),
                            ("exposure", exposure), ("outcome", outcome)):
            arr = spec._expand(np.asarray(value, dtype=np.float64), spec.table_axes(name))
            object.__setattr__(spec, name, arr)
        for arr in [spec.selection, spec.propensity, spec.exposure, spec.outcome, spec.degree, *norm.values()]:
            if arr is not None:
                arr.setflags(write=False)
        return spec

    # -- layout -----------------------------------------------------------
    @property
    def undefined_po(self):
        return self.degree is not None

    @property
    def levels(self):
        return self.g_max + 1

    def resolve(self, role):
        return self.aliases.get(role, role)

    def support(self, role):
        return int(self.blocks[self.resolve(role)].shape[0])

    def free_roles(self):
        return tuple(r for r in ROLES if r not in self.aliases)

    def axis_size(self, name):
        if name in ("S", "A"):
            return 2
        if name in ("G", "N"):
            return self.levels
        return self.support(name)

    def table_axes(self, name):
        if name == "selection":
            return SELECTION_PARENTS
        if name == "propensity":
            return PROPENSITY_PARENTS
        if name == "exposure":
            return ("S",) + (("N",) if self.undefined_po else ()) + EXPOSURE_BLOCKS + ("G",)
        if name == "outcome":
            return OUTCOME_AXES
        if name == "degree":
            return ("S", "N")
        raise KeyError(name)

    def expected_shape(self, name):
        return tuple(self.axis_size(a) for a in self.table_axes(name))

    def _expand(self, arr, axes):
        if arr.ndim == len(axes):
            return arr.copy()
        kept = [i for i, a in enumerate(axes) if a not in ROLES or self.support(a) > 1]
        if arr.ndim != len(kept):
            return arr.copy()  # left for validation to report
        shape = [1] * len(axes)
        for i, size in zip(kept, arr.shape):
            shape[i] = size
        return arr.reshape(shape).copy()

    def pseudo_propensity_table(self, s=1):
        return pseudo_propensity_table(self, s)


@dataclass(frozen=True)
class Violation:
    kind: str
    table: str
    location: str
    message: str

    def __str__(self):
        loc = f"[{self.location}]" if self.location else ""
        return f"{self.kind}: {self.table}{loc} {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self):
        return {v.kind for v in self.violations}

    def to_dict(self):
        return {"ok": self.ok, "violations": [vars(v) for v in self.violations]}


def _locate(axes, idx):
    parts = []
    for name, i in zip(axes, idx):
        if name == "S":
            parts.append(f"S={i + 1}")
        else:
            parts.append(f"{name}={i}")
    return ", ".join(parts)


def _flag_cells(out, kind, table, axes, mask, message, limit=20):
    cells = np.argwhere(mask)
    for idx in cells[:limit]:
        out.append(Violation(kind, table, _locate(axes, tuple(int(i) for i in idx)), message))
    if len(cells) > limit:
        out.append(Violation(kind, table, "", f"{len(cells) - limit} further cells"))


def validate_scenario(spec):
    """Check a scenario against the structural and positivity requirements.

    Violations are returned as data; nothing is raised.
    """
    out = []
    if int(spec.g_max) != spec.g_max or spec.g_max < 0:
        out.append(Violation("range", "g_max", "", "g_max must be a non-negative integer"))
        return ValidationReport(tuple(out))

    for role, target in spec.aliases.items():
        if role not in ROLES or target not in ROLES:
            out.append(Violation("alias", "aliases", role, f"unknown role in alias {role}->{target}"))
        elif role == target or target in spec.aliases:
            out.append(Violation("alias", "aliases", role, "alias target must be a free role"))
        elif spec.blocks[role].shape[0] not in (1, spec.blocks[target].shape[0]):
            out.append(Violation("alias", "aliases", role, "aliased block support differs from its target"))
    if any(v.kind == "alias" for v in out):
        return ValidationReport(tuple(out))

    for role in ROLES:
        pmf = spec.blocks[role]
        if pmf.ndim != 1 or pmf.size == 0:
            out.append(Violation("shape", "blocks", role, "pmf must be a non-empty vector"))
        elif not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
            out.append(Violation("range", "blocks", role, "pmf entries must be finite and >= 0"))
        elif abs(pmf.sum() - 1.0) > ROW_TOL and role not in spec.aliases:
            out.append(Violation("row_sum", "blocks", role, f"pmf sums to {pmf.sum()!r}"))

    names = ["selection", "propensity", "exposure", "outcome"] + (["degree"] if spec.undefined_po else [])
    shapes_ok = True
    for name in names:
        arr = getattr(spec, name)
        expected = spec.expected_shape(name)
        if arr.shape != expected:
            shapes_ok = False
            if name == "propensity" and spec.undefined_po and arr.ndim == len(expected) + 1:
                out.append(Violation("n_dependence", name, "",
                                     "propensity table carries an N axis; treatment must not depend on N"))
            else:
                out.append(Violation("shape", name, "", f"shape {arr.shape}, expected {expected}"))
    if not shapes_ok:
        return ValidationReport(tuple(out))

    for name in ("selection", "propensity"):
        arr = getattr(spec, name)
        axes = spec.table_axes(name)
        bad = ~np.isfinite(arr) | (arr <= 0) | (arr >= 1)
        _flag_cells(out, "positivity", name, axes, bad, "probability must lie strictly inside (0, 1)")

    ex_axes = spec.table_axes("exposure")[:-1]
    ex = spec.exposure
    _flag_cells(out, "range", "exposure", ex_axes, np.any(~np.isfinite(ex) | (ex < 0), axis=-1),
                "row entries must be finite and >= 0")
    _flag_cells(out, "row_sum", "exposure", ex_axes, np.abs(ex.sum(axis=-1) - 1.0) > ROW_TOL,
                "row does not sum to 1")
    if spec.undefined_po:
        g = np.arange(spec.levels)
        n = np.arange(spec.levels).reshape((1, -1) + (1,) * len(EXPOSURE_BLOCKS) + (1,))
        above = (g > n) & (ex != 0)
        _flag_cells(out, "support", "exposure", ex_axes, np.any(above, axis=-1),
                    "mass on exposure levels above the neighbor count")
        deg = spec.degree
        _flag_cells(out, "range", "degree", ("S",), np.any(~np.isfinite(deg) | (deg < 0), axis=-1),
                    "degree pmf entries must be finite and >= 0")
        _flag_cells(out, "row_sum", "degree", ("S",), np.abs(deg.sum(axis=-1) - 1.0) > ROW_TOL,
                    "degree pmf does not sum to 1")

    if not np.all(np.isfinite(spec.outcome)):
        _flag_cells(out, "finite", "outcome", OUTCOME_AXES, ~np.isfinite(spec.outcome),
                    "potential outcome must be finite")
    return ValidationReport(tuple(out))


def require_valid(spec):
    report = validate_scenario(spec)
    if not report.ok:
        raise ScenarioValidationError(report)
    return spec


def transport_violations(spec):
    """Aliases that make outcomes share causes with S or with the exposure.

    Any such alias breaks the assumptions under which the transport bias
    term is an identity.
    """
    found = []
    groups = {}
    for role in ROLES:
        groups.setdefault(spec.resolve(role), set()).add(role)
    for members in groups.values():
        if len(members) < 2:
            continue
        ys = members & _Y_ROLES
        if ys and members & _S_ROLES:
            found.append(f"{sorted(members)}: outcome and selection share a cause")
        if members & {"X_AY", "U_AY"} and members & _G_ROLES:
            found.append(f"{sorted(members)}: outcome-only covariate also drives the exposure")
    return found


def require_transportable(spec):
    problems = transport_violations(spec)
    if problems:
        raise StructuralError("transportability structure violated: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# joint layout and enumeration

class _Layout:
    """Dense axis layout for broadcasting factor tables against each other."""

    def __init__(self, spec, extra):
        self.spec = spec
        self.names = list(spec.free_roles()) + list(extra)
        self.sizes = [spec.axis_size(n) for n in self.names]
        self.pos = {n: i for i, n in enumerate(self.names)}

    def axis(self, name):
        return self.pos[self.spec.resolve(name)]

    def view(self, table, table_axes):
        idx = [self.axis(n) for n in table_axes]
        out_axes = sorted(set(idx))
        if idx != out_axes:
            letters = string.ascii_letters
            sub = "".join(letters[i] for i in idx) + "->" + "".join(letters[i] for i in out_axes)
            table = np.einsum(sub, table)
        shape = [1] * len(self.names)
        for i in out_axes:
            shape[i] = self.sizes[i]
        return np.asarray(table).reshape(shape)

    def covariate_weight(self):
        w = None
        for role in self.spec.free_roles():
            v = self.view(self.spec.blocks[role], (role,))
            w = v if w is None else w * v
        return w


def _selection_factor(spec):
    # axes ("S",) + SELECTION_PARENTS; index 0 is S=1
    return np.stack([spec.selection, 1.0 - spec.selection], axis=0)


def _treatment_factor(spec):
    return np.stack([1.0 - spec.propensity, spec.propensity], axis=-1)


@dataclass(frozen=True)
class JointState:
    values: dict
    s: int
    a: int
    g: int
    n: int | None
    weight: float


@dataclass(frozen=True, eq=False)
class JointEnumeration:
    """Columnar enumeration of every positive-weight joint state."""

    spec: ScenarioSpec
    columns: dict
    weights: np.ndarray

    def __len__(self):
        return self.weights.shape[0]

    def __iter__(self):
        cols = self.columns
        has_n = "n" in cols
        for i in range(len(self)):
            yield JointState(
                {r: int(cols[r][i]) for r in ROLES},
                int(cols["s"][i]), int(cols["a"][i]), int(cols["g"][i]),
                int(cols["n"][i]) if has_n else None,
                float(self.weights[i]),
            )

    def to_measure(self):
        spec = self.spec
        cols = self.columns
        prop = spec.propensity[(cols["s"] - 1,) + tuple(cols[r] for r in TRUE_PROPENSITY_ROLES)]
        dims = [spec.support(r) for r in OUTCOME_ROLES]
        po_row = np.ravel_multi_index([cols[r] for r in OUTCOME_ROLES], dims)
        po_table = spec.outcome.reshape(2, spec.levels, -1).transpose(2, 0, 1)
        return PopulationMeasure(
            cols, self.weights, prop, po_table, po_row, spec.g_max, "enumeration",
            {r: spec.support(r) for r in ROLES}, undefined_po=spec.undefined_po, g_mode="tabular",
        )


def joint_cardinality(spec):
    extra = 2 * 2 * spec.levels * (spec.levels if spec.undefined_po else 1)
    total = extra
    for role in spec.free_roles():
        total *= spec.support(role)
    return total


def enumerate_joint(spec, cap=None):
    """Enumerate all joint states with nonzero weight.

    Raises :class:`EnumerationSizeError` before allocating anything when the
    dense state count exceeds ``cap`` (default: :func:`max_states`).
    """
    require_valid(spec)
    cap = max_states() if cap is None else int(cap)
    card = joint_cardinality(spec)
    if card > cap:
        raise EnumerationSizeError(card, cap)
    extra = ["S"] + (["N"] if spec.undefined_po else []) + ["A", "G"]
    lay = _Layout(spec, extra)
    w = lay.covariate_weight()
    w = w * lay.view(_selection_factor(spec), ("S",) + SELECTION_PARENTS)
    if spec.undefined_po:
        w = w * lay.view(spec.degree, ("S", "N"))
    w = w * lay.view(_treatment_factor(spec), PROPENSITY_PARENTS + ("A",))
    w = w * lay.view(spec.exposure, spec.table_axes("exposure"))
    w = np.broadcast_to(w, lay.sizes).ravel()
    keep = np.flatnonzero(w > 0)
    index = np.unravel_index(keep, lay.sizes)
    named = dict(zip(lay.names, index))
    columns = {}
    for role in ROLES:
        columns[role] = named[spec.resolve(role)].astype(np.int64)
    columns["s"] = named["S"].astype(np.int64) + 1
    columns["a"] = named["A"].astype(np.int64)
    columns["g"] = named["G"].astype(np.int64)
    if spec.undefined_po:
        columns["n"] = named["N"].astype(np.int64)
    weights = np.ascontiguousarray(w[keep])
    return JointEnumeration(spec, columns, weights)


def enumeration_measure(spec, cap=None):
    return enumerate_joint(spec, cap).to_measure()


def _covariates_and_selection(spec, extra=()):
    lay = _Layout(spec, ["S", *extra])
    w = lay.covariate_weight() * lay.view(_selection_factor(spec), ("S",) + SELECTION_PARENTS)
    return lay, w


def pseudo_propensity_table(spec, s=1):
    """``p(A=1 | S=s, X_AY)`` by exact marginalization, indexed by X_AY value."""
    require_valid(spec)
    lay, w = _covariates_and_selection(spec)
    num = w * lay.view(spec.propensity, PROPENSITY_PARENTS)
    si = lay.axis("S")
    xa = lay.axis("X_AY")
    drop = tuple(i for i in range(len(lay.sizes)) if i not in (si, xa))
    den_full = np.broadcast_to(w, lay.sizes).sum(axis=drop)
    num_full = np.broadcast_to(num, lay.sizes).sum(axis=drop)
    # remaining axes are (X_AY, S) or (S, X_AY) depending on layout order
    if xa > si:
        den_full, num_full = den_full.T, num_full.T
    den, num = den_full[:, s - 1], num_full[:, s - 1]
    if np.any(den <= 0):
        bad = int(np.flatnonzero(den <= 0)[0])
        raise UndefinedStratumError(f"X_AY={bad} has zero mass given S={s}")
    return num / den


def exposure_given_outcome_covariates(spec, s):
    """``p(G=g | S=s, X_GY, U_GY)`` as an array of shape (k_XGY, k_UGY, levels).

    Entries for impossible covariate combinations are NaN.
    """
    require_valid(spec)
    extra = ["N"] if spec.undefined_po else []
    lay = _Layout(spec, ["S", *extra, "G"])
    w = lay.covariate_weight() * lay.view(_selection_factor(spec), ("S",) + SELECTION_PARENTS)
    if spec.undefined_po:
        w = w * lay.view(spec.degree, ("S", "N"))
    joint = np.broadcast_to(w * lay.view(spec.exposure, spec.table_axes("exposure")), lay.sizes)
    keep = sorted({lay.axis("S"), lay.axis("X_GY"), lay.axis("U_GY"), lay.axis("G")})
    summed = joint.sum(axis=tuple(i for i in range(len(lay.sizes)) if i not in keep))
    kx, ku = spec.support("X_GY"), spec.support("U_GY")
    x, u, g = np.meshgrid(np.arange(kx), np.arange(ku), np.arange(spec.levels), indexing="ij")
    grid = {lay.axis("G"): g, lay.axis("U_GY"): u, lay.axis("X_GY"): x, lay.axis("S"): np.full_like(g, s - 1)}
    sub = summed[tuple(grid[i] for i in keep)]
    if lay.axis("X_GY") == lay.axis("U_GY"):
        sub = np.where(x == u, sub, 0.0)
    den = sub.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, sub / np.where(den > 0, den, 1.0), np.nan)


# ---------------------------------------------------------------------------
# random generator

@dataclass(frozen=True)
class SizeCaps:
    max_support: int = 3
    max_g: int = 3

    def __post_init__(self):
        if self.max_support < 1 or self.max_g < 0:
            raise InputDomainError("size caps must be positive")


OUTCOME_FORMS = ("general", "additive", "separable")
EXPOSURE_FORMS = ("general", "identical", "randomized", "equal_marginals")


def _pmf_rows(rng, shape, width):
    u = rng.uniform(0.05, 0.95, tuple(shape) + (width,))
    return u / u.sum(axis=-1, keepdims=True)


def _exposure_rows(rng, shape, levels, undefined):
    """Rows over G; with ``undefined`` the leading axis is N and rows stop at n."""
    if not undefined:
        return _pmf_rows(rng, shape, levels)
    out = np.zeros((levels,) + tuple(shape) + (levels,))
    for n in range(levels):
        out[n, ..., : n + 1] = _pmf_rows(rng, shape, n + 1)
    return out


def random_scenario(seed, caps=None, *, g_max=None, outcome_range=(-1.0, 1.0), no_confounding=False,
                    undefined_po=False, outcome_form="general", exposure_form="general"):
    """Seeded random scenario that always passes :func:`validate_scenario`.

    Conditional probabilities are drawn from [0.05, 0.95].  ``outcome_form``
    picks a general, additive (``f0 + f1(a,.) + f2(g,.)``) or separable
    (additive plus ``f3(a, g)``) outcome table.  ``exposure_form`` picks a
    general exposure table, one identical across populations, one that
    ignores covariates ("randomized"), or one whose covariate dependence
    differs between populations while the marginals agree.
    """
    if outcome_form not in OUTCOME_FORMS:
        raise InputDomainError(f"outcome_form must be one of {OUTCOME_FORMS}")
    if exposure_form not in EXPOSURE_FORMS:
        raise InputDomainError(f"exposure_form must be one of {EXPOSURE_FORMS}")
    caps = caps or SizeCaps()
    lo, hi = outcome_range
    if not lo <= hi:
        raise InputDomainError("outcome_range must be ordered")
    rng = np.random.default_rng(seed)
    if g_max is None:
        g_max = int(rng.integers(0, caps.max_g + 1))
    levels = g_max + 1
    sizes = {r: int(rng.integers(1, caps.max_support + 1)) for r in ROLES}
    if exposure_form == "equal_marginals":
        sizes["X_GY"] = max(2, sizes["X_GY"])
    if exposure_form in ("identical", "equal_marginals", "randomized"):
        # the exposure must not see the selection-side covariates
        sizes["X_GS"] = sizes["U_GS"] = 1
    blocks = {r: _pmf_rows(rng, (), k) for r, k in sizes.items()}
    if exposure_form == "equal_marginals":
        p = blocks["X_GY"]
        blocks["X_GY"] = (p + p[::-1]) / 2.0

    def shape_of(roles):
        return tuple(sizes[r] for r in roles)

    selection = rng.uniform(0.05, 0.95, shape_of(SELECTION_PARENTS))
    prop_shape = (2,) + shape_of(TRUE_PROPENSITY_ROLES)
    if no_confounding:
        base = rng.uniform(0.05, 0.95, (2, sizes["X_AY"]))
        propensity = np.broadcast_to(base.reshape((2, sizes["X_AY"]) + (1,) * 5), prop_shape).copy()
    else:
        propensity = rng.uniform(0.05, 0.95, prop_shape)

    blk_shape = shape_of(EXPOSURE_BLOCKS)
    n_axes = 1 if undefined_po else 0
    if exposure_form == "general":
        exposure = np.stack([_exposure_rows(rng, blk_shape, levels, undefined_po) for _ in range(2)])
    elif exposure_form == "identical":
        one = _exposure_rows(rng, blk_shape, levels, undefined_po)
        exposure = np.stack([one, one])
    elif exposure_form == "randomized":
        rows = np.stack([_exposure_rows(rng, (), levels, undefined_po) for _ in range(2)])
        exposure = np.broadcast_to(
            rows.reshape(rows.shape[: 1 + n_axes] + (1,) * len(EXPOSURE_BLOCKS) + (levels,)),
            (2,) + rows.shape[1: 1 + n_axes] + blk_shape + (levels,),
        ).copy()
    else:
        k = sizes["X_GY"]
        rows = _exposure_rows(rng, (k,), levels, undefined_po)  # ([N], X_GY, G)
        flipped = np.flip(rows, axis=-2)
        pre = rows.shape[:-2]
        full = pre + blk_shape + (levels,)
        shape = pre + (1, 1, k, 1, 1, 1) + (levels,)
        exposure = np.stack([np.broadcast_to(rows.reshape(shape), full),
                             np.broadcast_to(flipped.reshape(shape), full)]).copy()

    degree = None
    if undefined_po:
        if exposure_form in ("identical", "equal_marginals"):
            row = _pmf_rows(rng, (), levels)
            degree = np.stack([row, row])
        else:
            degree = _pmf_rows(rng, (2,), levels)

    cov_shape = shape_of(OUTCOME_ROLES)
    if outcome_form == "general":
        outcome = rng.uniform(lo, hi, (2, levels) + cov_shape)
    else:
        parts = 3 if outcome_form == "additive" else 4
        a_lo, a_hi = lo / parts, hi / parts
        f0 = rng.uniform(a_lo, a_hi, cov_shape)
        f1 = rng.uniform(a_lo, a_hi, (2,) + cov_shape)
        f2 = rng.uniform(a_lo, a_hi, (levels,) + cov_shape)
        outcome = f0[None, None] + f1[:, None] + f2[None, :]
        if outcome_form == "separable":
            f3 = rng.uniform(a_lo, a_hi, (2, levels))
            outcome = outcome + f3.reshape((2, levels) + (1,) * len(cov_shape))

    return ScenarioSpec.build(
        blocks=blocks, selection=selection, propensity=propensity, exposure=exposure,
        outcome=outcome, g_max=g_max, degree=degree,
    )


def with_degree(spec, degree, exposure_by_n=None):
    """Undefined-outcome variant of a well-defined scenario.

    ``degree`` is ``p(N=n | S)`` with shape (2, levels).  Rows for each ``n``
    default to the original exposure rows truncated to ``0..n`` and
    renormalized; the row for ``n = g_max`` is the original row unchanged.
    """
    if spec.undefined_po:
        raise InputDomainError("scenario already has a degree table")
    if exposure_by_n is None:
        base = np.asarray(spec.exposure)
        levels = spec.levels
        rows = []
        for n in range(levels):
            if n == levels - 1:
                rows.append(base.copy())
                continue
            r = base.copy()
            r[..., n + 1:] = 0.0
            tot = r.sum(axis=-1, keepdims=True)
            r = np.where(tot > 0, r / np.where(tot > 0, tot, 1.0), 0.0)
            r[..., 0] = np.where(tot[..., 0] > 0, r[..., 0], 1.0)
            rows.append(r)
        exposure_by_n = np.stack(rows, axis=1)
    return ScenarioSpec.build(
        blocks={r: spec.blocks[r] for r in ROLES}, selection=spec.selection, propensity=spec.propensity,
        exposure=exposure_by_n, outcome=spec.outcome, g_max=spec.g_max, degree=degree,
        aliases=spec.aliases,
    )


def joint_total(enum):
    return _kernels.compensated_sum(enum.weights)
