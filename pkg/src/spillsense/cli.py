"""Command-line interface.

Exit codes: 0 success, 1 identity check failed, 2 bad input or violated
assumption, 3 numeric or positivity failure, 4 enumeration size cap.
"""

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import fileio
from .bounds import DataSummary, contour_grid, parse_axis, worst_case_bias
from .decompose import bias_phi1, bias_phi2, bias_undefined, check_corollary, t3_theta
from .errors import InputDomainError, ModeError, ScenarioValidationError, SpillsenseError
from .estimate import oracle_estimands
from .graph import ExposureSpec
from .scenario import enumeration_measure, random_scenario, validate_scenario
from .simulate import (
    NETWORK_KINDS,
    configuration_conditional_measure,
    empirical_measure,
    generate_network,
    generate_population,
)
from .suite import random_specs, run_suite


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    out: Path | None = None
    seed: int | None = None
    transport: bool = False
    undefined_po: bool = False
    mode: str = "exact"
    tolerance: float = 1e-9

    def check(self, needs_seed=False):
        for name, path in self.inputs.items():
            if path is not None and not Path(path).exists():
                raise InputDomainError(f"--{name} file not found: {path}")
        if needs_seed and self.seed is None:
            raise InputDomainError(f"{self.command} needs --seed")
        return self


def _config(args, **inputs):
    return RunConfig(
        args.command, inputs, Path(args.out) if getattr(args, "out", None) else None,
        getattr(args, "seed", None), getattr(args, "transport", False),
        getattr(args, "undefined_po", False), getattr(args, "mode", "exact"),
        getattr(args, "tolerance", 1e-9),
    )


def _emit(obj, out):
    text = fileio.dump_json(obj, out)
    if out is None:
        sys.stdout.write(text)


def _load_valid_scenario(path):
    spec = fileio.load_scenario(path)
    report = validate_scenario(spec)
    if not report.ok:
        raise ScenarioValidationError(report)
    return spec


# ---------------------------------------------------------------------------
# subcommands

def run_verify(args):
    cfg = _config(args, scenario=args.scenario)
    if (args.scenario is None) == (args.random is None):
        raise InputDomainError("verify needs exactly one of --scenario or --random")
    cfg.check(needs_seed=args.random is not None)
    if args.scenario:
        specs = [(args.scenario, _load_valid_scenario(args.scenario))]
    else:
        if args.random < 1:
            raise InputDomainError("--random needs a positive count")
        specs = random_specs(args.random, cfg.seed)
    report = run_suite(specs, cfg.tolerance)
    print("\n".join(report.lines()))
    print(f"{report.scenarios} scenario(s); tolerance {cfg.tolerance:g}; {'PASS' if report.ok else 'FAIL'}")
    if cfg.out:
        fileio.dump_json(report.to_dict(), cfg.out)
    return 0 if report.ok else 1


def run_scenario(args):
    cfg = _config(args).check(needs_seed=True)
    spec = random_scenario(cfg.seed, g_max=args.g_max, undefined_po=cfg.undefined_po,
                           outcome_form=args.outcome_form, exposure_form=args.exposure_form)
    _emit(fileio.scenario_to_dict(spec), cfg.out)
    return 0


def run_network(args):
    cfg = _config(args).check(needs_seed=args.kind == "erdos_renyi")
    net = generate_network(args.kind, args.units, cfg.seed, p=args.p, k=args.k)
    if cfg.out is None:
        raise InputDomainError("network needs --out")
    fileio.save_network(net, cfg.out)
    print(f"wrote {net.unit_count} units, {len(net.edges())} edges to {cfg.out}")
    return 0


def _exposure(text, g_max):
    if text is None or text == "count":
        return ExposureSpec.count(g_max)
    if text == "any":
        return ExposureSpec.any()
    if text.startswith("threshold:"):
        try:
            return ExposureSpec.threshold(int(text.split(":", 1)[1]))
        except ValueError:
            raise InputDomainError(f"bad threshold in {text!r}") from None
    raise InputDomainError(f"unknown exposure {text!r}; use count, any or threshold:K")


def run_simulate(args):
    cfg = _config(args, scenario=args.scenario, network=args.network).check(needs_seed=True)
    if args.scenario is None or args.network is None or cfg.out is None:
        raise InputDomainError("simulate needs --scenario, --network and --out")
    spec = _load_valid_scenario(args.scenario)
    if cfg.undefined_po and not spec.undefined_po:
        raise ModeError("--undefined-po needs a scenario with a degree table")
    net = fileio.load_network(args.network)
    exposure = _exposure(args.exposure, spec.g_max)
    if args.clamp:
        exposure = ExposureSpec(exposure.kind, exposure.g_max, exposure.k, True)
    pop = generate_population(spec, net, cfg.seed, exposure)
    fileio.save_population(pop, cfg.out, spec, Path(args.network).resolve())
    print(f"wrote {pop.unit_count} units to {cfg.out} and metadata to {fileio.sidecar_path(cfg.out)}")
    return 0


def decompose_report(measure, spec, transport=False, undefined_po=False):
    """Breakdown plus estimands, as written by the ``decompose`` subcommand."""
    if undefined_po or measure.undefined_po:
        if not measure.undefined_po:
            raise ModeError("undefined-outcome mode needs a scenario with a degree table")
        if transport and measure.g_mode != "tabular":
            raise ModeError("transport terms are only available for exact enumeration of a scenario")
        bd = bias_undefined(measure, spec if transport else None)
        if not transport:
            bd.t3, bd.residuals = [], {"bias_phi1": bd.residuals["bias_phi1"]}
            for key in ("T3", "T1+T2+T3"):
                bd.totals.pop(key, None)
            for key in ("phi2", "bias_phi2"):
                bd.direct.pop(key, None)
        out = bd.to_dict()
    elif transport:
        bd = bias_phi2(measure, spec)
        out = bd.to_dict()
        out["t3_theta"] = t3_theta(measure, spec, bd).to_dict()
        out["corollary"] = check_corollary(measure, spec, breakdown=bd).to_dict()
    else:
        out = bias_phi1(measure, spec).to_dict()
    out["estimands"] = oracle_estimands(measure).to_dict()
    return out


def run_decompose(args):
    cfg = _config(args, scenario=args.scenario, data=args.data, network=args.network).check()
    if args.scenario is None:
        raise InputDomainError("decompose needs --scenario")
    spec = _load_valid_scenario(args.scenario)
    if args.data is None:
        if cfg.mode != "exact":
            raise ModeError("empirical mode needs a population file via --data")
        measure = enumeration_measure(spec)
        source = "enumeration"
    else:
        if cfg.transport:
            raise ModeError("transport terms are only checked by exact enumeration of a scenario (omit --data)")
        net = fileio.load_network(args.network) if args.network else None
        pop = fileio.load_population(args.data, net, spec)
        measure = configuration_conditional_measure(pop, spec) if cfg.mode == "exact" else empirical_measure(pop, spec)
        source = measure.provenance
    report = decompose_report(measure, spec, cfg.transport, cfg.undefined_po)
    report["source"] = source
    report["scenario_hash"] = fileio.scenario_hash(spec)
    _emit(report, cfg.out)
    if cfg.out:
        res = ", ".join(f"{k}={v:.3e}" for k, v in report["residuals"].items())
        print(f"wrote breakdown to {cfg.out} (residuals: {res})")
    return 0


def _summary_and_gmax(args):
    params, summary, g_max = fileio.load_params(args.params)
    if args.data:
        sample, meta = fileio.load_observed(args.data)
        g_hint = g_max if g_max is not None else meta.get("g_max", summary.g_max if summary else 0)
        summary = DataSummary.from_sample(sample, int(g_hint))
    if g_max is None:
        if summary is not None:
            g_max = summary.g_max
        elif params.zeta is not None:
            g_max = len(params.zeta) - 1
    return params, summary, g_max


def run_bound(args):
    cfg = _config(args, params=args.params, data=args.data).check()
    if args.params is None:
        raise InputDomainError("bound needs --params")
    params, summary, g_max = _summary_and_gmax(args)
    if cfg.transport and g_max is None:
        raise InputDomainError("transport bound needs g_max (params file, data sidecar or zeta length)")
    bound = worst_case_bias(params, summary, cfg.transport, g_max)
    out = bound.to_dict()
    if summary is not None:
        out["summary"] = summary.to_dict()
    _emit(out, cfg.out)
    return 0


def run_contour(args):
    cfg = _config(args, params=args.params, data=args.data).check()
    if args.params is None or cfg.out is None:
        raise InputDomainError("contour needs --params and --out")
    if not args.vary or len(args.vary) != 2:
        raise InputDomainError("contour needs exactly two --vary axes")
    params, summary, g_max = _summary_and_gmax(args)
    axes = [parse_axis(v) for v in args.vary]
    rows = contour_grid(params, summary, axes[0], axes[1], cfg.transport, g_max)
    fileio.write_contour(rows, cfg.out)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="spillsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the identity suite")
    p.add_argument("--scenario")
    p.add_argument("--random", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--out")
    p.set_defaults(func=run_verify)

    p = sub.add_parser("scenario", help="write a seeded random scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--g-max", type=int, dest="g_max")
    p.add_argument("--undefined-po", action="store_true")
    p.add_argument("--outcome-form", default="general")
    p.add_argument("--exposure-form", default="general")
    p.add_argument("--out")
    p.set_defaults(func=run_scenario)

    p = sub.add_parser("network", help="write a generated network")
    p.add_argument("--kind", choices=NETWORK_KINDS, required=True)
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=run_network)

    p = sub.add_parser("simulate", help="realize a scenario on a network")
    p.add_argument("--scenario")
    p.add_argument("--network")
    p.add_argument("--seed", type=int)
    p.add_argument("--exposure")
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--undefined-po", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("decompose", help="bias breakdown of the naive functional")
    p.add_argument("--scenario")
    p.add_argument("--data")
    p.add_argument("--network")
    p.add_argument("--mode", choices=("exact", "empirical"), default="exact")
    p.add_argument("--transport", action="store_true")
    p.add_argument("--undefined-po", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=run_decompose)

    for name, func, text in (("bound", run_bound, "worst-case bias bound"),
                             ("contour", run_contour, "bias bound over a parameter grid")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--params")
        p.add_argument("--data")
        p.add_argument("--transport", action="store_true")
        p.add_argument("--out")
        if name == "contour":
            p.add_argument("--vary", action="append")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print("scenario failed validation:", file=sys.stderr)
        for v in exc.report.violations:
            print(f"  {v}", file=sys.stderr)
        return exc.exit_code
    except SpillsenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
