#!/usr/bin/env python3
"""
solenoid - curve decompositions of vector measures, with a verification harness.

Exit codes: 0 success, 1 failed check, 2 usage or parameter error, 3 I/O or parse error.
"""
import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from solenoid.core.config_store import ConfigStore
from solenoid.core.decompose import DecomposeParams, build_report, check_div_free, decompose_div_free
from solenoid.core.errors import FileFormatError, InvalidParameterError, SolenoidError
from solenoid.core.fields import make_panel
from solenoid.core.file_formats import (read_charge, read_measure, read_report, write_charge,
                                        write_ensemble, write_ensemble_csv, write_measure, write_report)
from solenoid.core.flow import FlowConfig
from solenoid.core.lift import DivergencePair, LiftParams, decompose_with_divergence
from solenoid.harness.report import compare_reports, render_table
from solenoid.harness.scenarios import SCENARIOS, Scenario, bounding_box, generate
from solenoid.harness.verify import VerificationSuite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def resolve_seed(args, config: ConfigStore) -> int:
    """SOLENOID_SEED beats --seed, which beats the configured seed."""
    env = os.environ.get("SOLENOID_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InvalidParameterError(f"SOLENOID_SEED must be an integer, got {env!r}")
    if args.seed is not None:
        return args.seed
    return int(config.get("decompose", "seed"))


def _panel(config: ConfigStore, charge, sigma=None):
    p = config.section("panel")
    return make_panel(p["seed"], p["n_fields"], p["n_functions"], bounding_box(charge, sigma, p["margin"]))


def _decompose_params(args, config: ConfigStore, seed: int) -> DecomposeParams:
    flow = config.section("flow")
    dec = config.section("decompose")
    ell = args.ell if args.ell is not None else flow["ell"]
    step = args.step if args.step is not None else flow["step"]
    record = args.record_count if args.record_count is not None else flow["record_count"]
    return DecomposeParams(
        epsilon=args.eps if args.eps is not None else dec["epsilon"],
        n_curves=args.curves if args.curves is not None else dec["n_curves"],
        flow=FlowConfig(ell, step, record),
        seed=seed,
    )


def cmd_gen(args, config: ConfigStore) -> int:
    section = config.section(args.scenario) if args.scenario in ("loop", "two_loops", "segment") else {}
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    if args.atoms is not None:
        kwargs["atoms"] = args.atoms
    if args.radius is not None:
        kwargs["radius"] = args.radius
    scenario = Scenario(args.scenario, **kwargs)
    charge, div = generate(scenario)
    write_charge(args.out, charge)
    print(f"✓ {scenario.name}: {len(charge)} atoms, Var = {scenario.exact_variation():.17g} -> {args.out}")
    if args.div_out:
        if div is None:
            print(f"Warning: scenario {scenario.name} has no atomic divergence to write", file=sys.stderr)
        else:
            write_measure(args.div_out, div)
            print(f"✓ Divergence measure -> {args.div_out}")
    return EXIT_OK


def cmd_check_div(args, config: ConfigStore) -> int:
    mu = read_charge(args.charge)
    threshold = args.threshold if args.threshold is not None else config.get("lift", "threshold")
    if args.div:
        sigma = read_measure(args.div)
        pair = DivergencePair.certify(mu, sigma, _panel(config, mu, sigma), threshold)
        value = pair.certification
        label = "certification error"
    else:
        value = check_div_free(mu, _panel(config, mu))
        label = "normalized divergence"
    passed = value <= threshold
    print(f"{label}: {value:.6g} (threshold {threshold}) {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _write_outputs(args, nu, payload) -> None:
    if args.out:
        write_ensemble(args.out, nu)
        print(f"✓ Ensemble of {len(nu)} curves -> {args.out}")
    if args.csv:
        write_ensemble_csv(args.csv, nu)
        print(f"✓ Curve samples -> {args.csv}")
    if args.report:
        write_report(args.report, payload)
        print(f"✓ Report -> {args.report}")


def cmd_decompose(args, config: ConfigStore) -> int:
    mu = read_charge(args.charge)
    params = _decompose_params(args, config, resolve_seed(args, config))
    panel = _panel(config, mu)
    nu = decompose_div_free(mu, params, threads=args.threads)
    report = build_report(mu, nu, params, panel)
    payload = {"timestamp": _timestamp(), "command": "decompose", "report": report.to_dict()}
    _write_outputs(args, nu, payload)
    print(f"mass = {report.mass:.17g}, mean length / ell = {report.lengths['mean_over_ell']:.4f}")
    return EXIT_OK


def cmd_lift_decompose(args, config: ConfigStore) -> int:
    mu = read_charge(args.charge)
    sigma = read_measure(args.div)
    inner = _decompose_params(args, config, resolve_seed(args, config))
    lift = config.section("lift")
    threshold = args.threshold if args.threshold is not None else lift["threshold"]
    slab = args.slab if args.slab is not None else 2.0 * inner.epsilon
    column_atoms = args.column_atoms if args.column_atoms is not None else lift["column_atoms"]
    params = LiftParams(inner.ell, column_atoms, slab, inner)
    panel = _panel(config, mu, sigma)
    pair = DivergencePair.certify(mu, sigma, panel, threshold)
    nu, report = decompose_with_divergence(pair, params, panel, threads=args.threads)
    payload = {"timestamp": _timestamp(), "command": "lift-decompose", "report": report.to_dict()}
    _write_outputs(args, nu, payload)
    print(f"kept {report.kept_curves} curves, weight {report.kept_weight:.6g} "
          f"(discarded {report.discarded_weight:.6g})")
    return EXIT_OK


def _apply_tolerances(config: ConfigStore, overrides: List[str]):
    for item in overrides:
        name, sep, value = item.partition("=")
        if not sep:
            raise InvalidParameterError(f"--tolerance expects NAME=VALUE, got {item!r}")
        if name not in config.section("tolerances"):
            raise InvalidParameterError(f"unknown tolerance {name!r}")
        try:
            config.set("tolerances", name, float(value))
        except ValueError:
            raise InvalidParameterError(f"tolerance {name} needs a number, got {value!r}")


def cmd_verify(args, config: ConfigStore) -> int:
    _apply_tolerances(config, args.tolerance or [])
    unknown = [c for c in (args.only or []) if c not in VerificationSuite.CHECKS]
    if unknown:
        raise InvalidParameterError(f"unknown checks {unknown}; choose from {', '.join(VerificationSuite.CHECKS)}")
    suite = VerificationSuite(config, threads=args.threads, seed=resolve_seed(args, config))
    result = suite.run(args.only)
    payload = result.to_dict()
    print(render_table(payload))
    if "total" in result.wall_time:
        print(f"Wall time: {result.wall_time['total']:.1f} s")
    if args.report:
        write_report(args.report, payload)
        print(f"✓ Report -> {args.report}")
    if not result.passed:
        print(f"Failed checks: {', '.join(result.failures)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_report(args, config: ConfigStore) -> int:
    data = read_report(args.path)
    if args.compare:
        diffs = compare_reports(data, read_report(args.compare), args.tolerance)
        if diffs:
            print(f"{len(diffs)} differing entries:")
            for key in diffs:
                print(f"  {key}")
            return EXIT_CHECK_FAILED
        print("✓ Reports match (timestamp and wall times excluded)")
        return EXIT_OK
    print(render_table(data.get("report", data)))
    return EXIT_OK


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", "-j", type=int, default=os.cpu_count() or 1,
                        help="Worker threads for curve integration (default: all cores)")
    common.add_argument("--seed", "-s", type=int, default=None,
                        help="Master seed (SOLENOID_SEED overrides it)")
    common.add_argument("--config", "-c", type=Path, default=None,
                        help="Config file (default: ~/.config/solenoid/verify.json)")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    return common


def _pipeline_options(parser: argparse.ArgumentParser):
    parser.add_argument("--charge", required=True, help="Charge JSON file")
    parser.add_argument("--ell", type=float, default=None, help="Curve length budget")
    parser.add_argument("--eps", type=float, default=None, help="Mollification width")
    parser.add_argument("--curves", type=int, default=None, help="Number of curves N")
    parser.add_argument("--step", type=float, default=None, help="RK4 step h")
    parser.add_argument("--record-count", type=int, default=None, help="Stored samples per curve (m + 1)")
    parser.add_argument("--out", help="Ensemble JSON output")
    parser.add_argument("--report", help="Report JSON output")
    parser.add_argument("--csv", help="CSV export of curve samples")


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        description="Decompose charges into weighted ensembles of 1-Lipschitz curves"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Write a built-in scenario charge")
    gen.add_argument("--scenario", required=True, choices=SCENARIOS)
    gen.add_argument("--atoms", type=int, default=None)
    gen.add_argument("--radius", type=float, default=None)
    gen.add_argument("--out", required=True, help="Charge JSON output")
    gen.add_argument("--div-out", help="Divergence measure JSON output, where the scenario has one")
    gen.set_defaults(func=cmd_gen)

    check = sub.add_parser("check-div", parents=[common], help="Normalized divergence of a charge")
    check.add_argument("--charge", required=True)
    check.add_argument("--div", help="Claimed divergence measure; certifies the pair instead")
    check.add_argument("--threshold", type=float, default=None)
    check.set_defaults(func=cmd_check_div)

    dec = sub.add_parser("decompose", parents=[common], help="Decompose a divergence-free charge")
    _pipeline_options(dec)
    dec.set_defaults(func=cmd_decompose)

    lift = sub.add_parser("lift-decompose", parents=[common],
                          help="Decompose a charge whose divergence is a signed measure")
    _pipeline_options(lift)
    lift.add_argument("--div", required=True, help="Divergence measure JSON file")
    lift.add_argument("--column-atoms", type=int, default=None)
    lift.add_argument("--slab", type=float, default=None, help="Slab width delta (default 2 eps)")
    lift.add_argument("--threshold", type=float, default=None, help="Certification threshold")
    lift.set_defaults(func=cmd_lift_decompose)

    verify = sub.add_parser("verify", parents=[common], help="Run the acceptance suite")
    verify.add_argument("--report", help="Report JSON output")
    verify.add_argument("--only", action="append", help="Run only this check (repeatable)")
    verify.add_argument("--tolerance", action="append", help="Override a tolerance, NAME=VALUE (repeatable)")
    verify.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", parents=[common], help="Render or compare report files")
    rep.add_argument("path")
    rep.add_argument("--compare", help="Second report; exit 1 if any entry differs")
    rep.add_argument("--tolerance", type=float, default=0.0, help="Relative tolerance for --compare")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        config = ConfigStore(args.config)
        return args.func(args, config)
    except (FileFormatError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except SolenoidError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
