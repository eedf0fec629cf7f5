"""File formats: scenarios, networks, populations, observed data, parameters.

Every writer goes through :func:`atomic_write`, which writes a temporary file
in the destination directory and renames it into place.  Floats are written
with ``repr`` so that reading a file back reproduces the values exactly.
"""

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .bounds import DataSummary, SensitivityParams
from .errors import InputDomainError
from .estimate import ObservedSample
from .graph import ExposureSpec, InterferenceNetwork
from .measure import ROLES
from .scenario import ScenarioSpec
from .simulate import SyntheticPopulation

SPEC_VERSION = 1
POPULATION_HEADER = ("unit", "s", "n", "a", "g", "y", "propensity")


# ---------------------------------------------------------------------------
# helpers

def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj, path=None):
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        atomic_write(path, text)
    return text


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputDomainError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputDomainError(f"{path}: invalid JSON ({exc})") from None


def sidecar_path(path):
    """Companion JSON of a CSV file: same stem, ``.json`` suffix."""
    return Path(path).with_suffix(".json")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(int(v))


def _write_csv(path, header, columns):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise InputDomainError(f"file not found: {path}") from None
    if not rows:
        raise InputDomainError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise InputDomainError(f"{path}: duplicate column names")
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise InputDomainError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}")
    return header, body


def _column(header, body, name, kind, path):
    if name not in header:
        raise InputDomainError(f"{path}: missing column {name!r}")
    j = header.index(name)
    try:
        if kind is int:
            return np.array([int(r[j]) for r in body], dtype=np.int64)
        return np.array([float(r[j]) if r[j] != "" else np.nan for r in body], dtype=np.float64)
    except ValueError as exc:
        raise InputDomainError(f"{path}: column {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# scenarios

def scenario_to_dict(spec):
    d = {
        "spec_version": SPEC_VERSION,
        "g_max": int(spec.g_max),
        "blocks": {r: spec.blocks[r].tolist() for r in ROLES},
        "selection": spec.selection.tolist(),
        "propensity": spec.propensity.tolist(),
        "exposure": spec.exposure.tolist(),
        "outcome": spec.outcome.tolist(),
    }
    if spec.degree is not None:
        d["degree"] = spec.degree.tolist()
    if spec.aliases:
        d["aliases"] = dict(spec.aliases)
    return d


def scenario_from_dict(d):
    """Build a (not yet validated) scenario from its JSON form.

    Tables may leave out the axes of absent (support-1) blocks.
    """
    if not isinstance(d, dict):
        raise InputDomainError("scenario JSON must be an object")
    version = d.get("spec_version")
    if version != SPEC_VERSION:
        raise InputDomainError(f"unsupported spec_version {version!r}; expected {SPEC_VERSION}")
    missing = [k for k in ("selection", "propensity", "exposure", "outcome", "g_max") if k not in d]
    if missing:
        raise InputDomainError(f"scenario is missing sections {missing}")
    try:
        return ScenarioSpec.build(
            blocks=d.get("blocks"), selection=d["selection"], propensity=d["propensity"],
            exposure=d["exposure"], outcome=d["outcome"], g_max=d["g_max"], degree=d.get("degree"),
            aliases=d.get("aliases"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputDomainError):
            raise
        raise InputDomainError(f"malformed scenario table: {exc}") from None


def save_scenario(spec, path):
    dump_json(scenario_to_dict(spec), path)


def load_scenario(path):
    return scenario_from_dict(_read_json(path))


def scenario_hash(spec):
    """SHA-256 of the canonical JSON form."""
    text = json.dumps(scenario_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# networks

def save_network(network, path):
    """Edge list CSV plus a sidecar recording the unit count and directedness."""
    edges = network.edges()
    _write_csv(path, ("src", "dst"), (edges[:, 0], edges[:, 1]))
    dump_json({"unit_count": network.unit_count, "directed": network.directed}, sidecar_path(path))


def load_network(path, unit_count=None, directed=None):
    """Read an edge list; unit count comes from the argument, the sidecar, or the largest index."""
    header, body = _read_csv(path)
    if header != ["src", "dst"]:
        raise InputDomainError(f"{path}: network header must be 'src,dst'")
    src = _column(header, body, "src", int, path)
    dst = _column(header, body, "dst", int, path)
    meta = _read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
    if unit_count is None:
        unit_count = meta.get("unit_count")
    if unit_count is None:
        unit_count = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
    if directed is None:
        directed = bool(meta.get("directed", False))
    return InterferenceNetwork.from_edges(int(unit_count), np.column_stack([src, dst]), directed)


# ---------------------------------------------------------------------------
# populations

def population_columns(pop):
    names = list(POPULATION_HEADER) + list(ROLES)
    cols = [np.arange(pop.unit_count), pop.s, pop.n, pop.a, pop.g, pop.y, pop.propensity]
    cols += [pop.covariates[r] for r in ROLES]
    for a in (0, 1):
        for g in range(pop.g_max + 1):
            names.append(f"po_a{a}_g{g}")
            cols.append(pop.po[:, a, g])
    return names, cols


def save_population(pop, path, spec=None, network_path=None):
    """Population CSV and its metadata sidecar."""
    names, cols = population_columns(pop)
    _write_csv(path, names, cols)
    meta = {
        "seed": pop.seed,
        "spec_hash": None if spec is None else scenario_hash(spec),
        "network": None if network_path is None else str(network_path),
        "unit_count": pop.unit_count,
        "g_max": pop.g_max,
        "exposure": pop.exposure.to_dict(),
        "undefined_po": pop.undefined_po,
    }
    dump_json(meta, sidecar_path(path))
    return meta


def load_population(path, network=None, spec=None):
    """Inverse of :func:`save_population`.

    The network is taken from the argument or from the path recorded in the
    metadata.  With ``spec`` given, its hash must match the recorded one.
    """
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise InputDomainError(f"population metadata {meta_path} not found")
    meta = _read_json(meta_path)
    if spec is not None and meta.get("spec_hash") not in (None, scenario_hash(spec)):
        raise InputDomainError("population was generated from a different scenario")
    header, body = _read_csv(path)
    unit = _column(header, body, "unit", int, path)
    if not np.array_equal(unit, np.arange(len(body))):
        raise InputDomainError(f"{path}: units must be listed as 0..n-1 in order")
    if network is None:
        if not meta.get("network"):
            raise InputDomainError("no network given and none recorded in the population metadata")
        network = load_network(meta["network"], meta.get("unit_count"))
    if network.unit_count != len(body):
        raise InputDomainError("network and population disagree on the number of units")
    g_max = int(meta["g_max"])
    ints = {k: _column(header, body, k, int, path) for k in ("s", "n", "a", "g")}
    y = _column(header, body, "y", float, path)
    prop = _column(header, body, "propensity", float, path)
    cov = {r: _column(header, body, r, int, path) for r in ROLES}
    po = np.empty((len(body), 2, g_max + 1))
    for a in (0, 1):
        for g in range(g_max + 1):
            po[:, a, g] = _column(header, body, f"po_a{a}_g{g}", float, path)
    return SyntheticPopulation(network, cov, ints["s"], ints["n"], prop, ints["a"], ints["g"], po, y,
                               meta.get("seed"), ExposureSpec.from_dict(meta["exposure"]),
                               bool(meta.get("undefined_po", False)))


# ---------------------------------------------------------------------------
# observed data

def load_observed(path):
    """Observed-data CSV: ``unit,a,y`` plus covariates, described by a sidecar.

    The sidecar maps column names to roles (``{"roles": {"age": "X_AY"}}``);
    only X_AY columns enter the estimator, and several X_AY columns form one
    joint stratum.  Without a sidecar, columns named after roles are used
    directly.  Optional columns: ``s`` (population, default 1) and
    ``pscore_pseudo``.  Returns ``(sample, meta)``.
    """
    header, body = _read_csv(path)
    meta = _read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
    roles = meta.get("roles") or {c: c for c in header if c in ROLES}
    bad = {c: r for c, r in roles.items() if r not in ROLES}
    if bad:
        raise InputDomainError(f"unknown roles in sidecar: {bad}")
    for c in roles:
        if c not in header:
            raise InputDomainError(f"{path}: sidecar names missing column {c!r}")
    a = _column(header, body, "a", int, path)
    y = _column(header, body, "y", float, path)
    if np.any(np.isnan(y)):
        raise InputDomainError(f"{path}: outcome column has empty cells")
    s = _column(header, body, "s", int, path) if "s" in header else None
    x_cols = [c for c in header if roles.get(c) == "X_AY"]
    if x_cols:
        j = [header.index(c) for c in x_cols]
        _, stratum = np.unique(np.array([[r[k] for k in j] for r in body], dtype=object).astype(str),
                               axis=0, return_inverse=True)
        stratum = np.asarray(stratum).ravel()
    else:
        stratum = np.zeros(len(body), dtype=np.int64)
    ps = _column(header, body, "pscore_pseudo", float, path) if "pscore_pseudo" in header else None
    return ObservedSample(a, y, stratum, s, ps), meta


def save_observed(path, a, y, covariates, s=None, pscore=None, roles=None):
    names, cols = ["unit", "a", "y"], [np.arange(len(a)), np.asarray(a), np.asarray(y, dtype=float)]
    if s is not None:
        names.append("s")
        cols.append(np.asarray(s))
    for name, values in covariates.items():
        names.append(name)
        cols.append(np.asarray(values))
    if pscore is not None:
        names.append("pscore_pseudo")
        cols.append(np.asarray(pscore, dtype=float))
    _write_csv(path, names, cols)
    dump_json({"roles": roles or {c: c for c in covariates}}, sidecar_path(path))


# ---------------------------------------------------------------------------
# parameters

def load_params(path):
    """Sensitivity parameters, plus the optional ``summary`` and ``g_max`` entries."""
    d = dict(_read_json(path))
    summary = d.pop("summary", None)
    g_max = d.pop("g_max", None)
    try:
        params = SensitivityParams.from_dict(d)
    except TypeError as exc:
        raise InputDomainError(f"{path}: {exc}") from None
    if summary is not None:
        summary = DataSummary.from_dict(summary)
    return params, summary, g_max


def save_params(params, path, summary=None, g_max=None):
    d = params.to_dict()
    if summary is not None:
        d["summary"] = summary.to_dict()
    if g_max is not None:
        d["g_max"] = int(g_max)
    dump_json(d, path)


def write_contour(rows, path):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("param1", "param2", "bound", "kill"))
    for v1, v2, bound, kill in rows:
        w.writerow((repr(v1), repr(v2), repr(bound), "" if kill is None else int(kill)))
    atomic_write(path, buf.getvalue())
