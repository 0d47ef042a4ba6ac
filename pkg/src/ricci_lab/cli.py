"""
Batch front end: `ricci-lab <command> [--config FILE] [flags]`.

Every command validates its whole config before computing or writing anything, flags win over
the config document. Exit statuses are listed in ExitStatus.
"""

import json
import logging
import math
import sys
from enum import IntEnum
from typing import Optional, Sequence

from ricci_lab.arg_parser import ArgParser
from ricci_lab.config.run_config import (ConfigError, DiagnoseConfig, Fault, FlowRunConfig, IdentityCheckConfig,
                                         SolveConfig, SweepConfig, VerifyConfig, load_config)
from ricci_lab.cpu_utils import ArgparseCoreType
from ricci_lab.dir import mkpdirp
from ricci_lab.file import (CsvFormatError, format_float, list2file, output_path, read_profile, write_diagnostics,
                            write_profile, write_sweep, write_trajectory)
from ricci_lab.flow import (FlowMode, FlowOutcome, FlowState, DiagnosticsRecord, entropy, mean_scalar_curvature,
                            run)
from ricci_lab.geometry import (InvalidProfileError, ProfileFamily, area, boundary_defects, curvature, gauss_bonnet,
                                is_admissible, make_profile, total_length)
from ricci_lab.soliton import (closed_profile, einstein_defect, identity_report, shoot, solve_closure, sweep)
from ricci_lab.verification import DEFAULT_TOLERANCES, run_invariant_suite

_logger = logging.getLogger(__name__)

# below this the identity residual is roundoff and carries no order information
RESIDUAL_FLOOR = 1e-13


class ExitStatus(IntEnum):
    OK = 0
    FAILURE = 1
    EXTINCTION = 2
    IO_ERROR = 3
    A_STAR_OUT_OF_TOLERANCE = 4
    INVALID_CONFIG = 5


def _emit_json(text: str, output_json: Optional[str]):
    sys.stdout.write(text)
    if output_json is not None:
        mkpdirp(output_json)
        list2file([text], output_json, add_sep=False)


def _dump_json(document: dict, output_json: Optional[str]):
    _emit_json(json.dumps(document, indent=2, sort_keys=True) + "\n", output_json)


def _shoot_overrides(args) -> dict:
    return {"step": args.step, "r_max": args.r_max}


def cmd_flow(args) -> ExitStatus:
    config = load_config(FlowRunConfig, args.config, {
        "profile": {"family": args.family, "n": args.n, "eps": args.eps, "k": args.k},
        "flow": {"mode": args.mode, "dt": args.dt, "t_end": args.t_end, "record_every": args.record_every,
                 "regrid_trigger": args.regrid_trigger, "convergence_tol": args.convergence_tol},
        "diagnostics_csv": args.diagnostics_csv,
        "snapshot_dir": args.snapshot_dir,
        "snapshot_every": args.snapshot_every,
    })
    profile = config.profile
    try:
        metric = make_profile(profile.family, profile.n, profile.eps, profile.k)
    except InvalidProfileError as e:
        raise ConfigError(f"Initial profile rejected: {e}")

    recorded = []

    def snapshot(state: FlowState, record: DiagnosticsRecord):
        recorded.append(record)
        if config.snapshot_dir is not None and config.snapshot_every > 0 \
                and (len(recorded) - 1) % config.snapshot_every == 0:
            write_profile(state.metric, output_path(config.snapshot_dir, f"profile_t{state.t:.6f}.csv"))

    result = run(metric, config.flow, on_record=snapshot)
    mkpdirp(config.diagnostics_csv)
    write_diagnostics(result.records, config.diagnostics_csv)
    last = result.records[-1]
    _logger.info(f"{result.outcome.value} at t={last.t}: area {last.area}, K in [{last.k_min}, {last.k_max}]")
    if result.outcome is FlowOutcome.EXTINCT:
        _logger.info(f"Extinction at t={result.extinction_time}")
        return ExitStatus.EXTINCTION
    return ExitStatus.OK


def cmd_soliton_sweep(args) -> ExitStatus:
    config = load_config(SweepConfig, args.config, {
        "shoot": _shoot_overrides(args),
        "a_values": args.a_values,
        "a_min": args.a_min,
        "a_max": args.a_max,
        "a_step": args.a_step,
        "workers": args.workers,
        "output_csv": args.output_csv,
        "trajectory_dir": args.trajectory_dir,
    })
    a_values = config.values()
    _logger.info(f"Shooting {len(a_values)} values of a in [{a_values[0]}, {a_values[-1]}]")
    rows = sweep(a_values, config.shoot.step, config.shoot.r_max, config.workers)
    mkpdirp(config.output_csv)
    write_sweep(rows, config.output_csv)
    if config.trajectory_dir is not None:
        for row in rows:
            if row.hit_zero:
                trajectory = shoot(row.a, config.shoot.step, config.shoot.r_max).trajectory
                write_trajectory(trajectory.r, trajectory.h,
                                 output_path(config.trajectory_dir, f"trajectory_a{format_float(row.a)}.csv"))
    missed = [row.a for row in rows if not row.hit_zero]
    if missed:
        _logger.warning(f"No zero of h for a in {missed}")
    return ExitStatus.OK


def cmd_solve(args) -> ExitStatus:
    config = load_config(SolveConfig, args.config, {
        "shoot": _shoot_overrides(args),
        "a_lo": args.a_lo,
        "a_hi": args.a_hi,
        "tol": args.tol,
        "a_tolerance": args.a_tolerance,
        "n": args.n,
        "output_json": args.output_json,
    })
    solution = solve_closure(config.a_lo, config.a_hi, config.tol, config.shoot.step, config.shoot.r_max)
    result = solution.result
    closed = closed_profile(result, config.n)
    document = {
        "a_star": solution.a_star,
        "at_bracket_edge": solution.at_bracket_edge,
        "bracket": [config.a_lo, config.a_hi],
        "A": result.A,
        "h_prime_at_A": result.h_prime_at_A,
        "closure_defect": result.closure_defect,
        "einstein_defect": einstein_defect(closed),
        "a_tolerance": config.a_tolerance,
    }
    _dump_json(document, config.output_json)
    if solution.at_bracket_edge or abs(solution.a_star) >= config.a_tolerance:
        _logger.error(f"Closing a_star={solution.a_star} is not zero within {config.a_tolerance}"
                      f"{' (bracket edge)' if solution.at_bracket_edge else ''}, a closed soliton with a != 0 "
                      f"needs investigation")
        return ExitStatus.A_STAR_OUT_OF_TOLERANCE
    return ExitStatus.OK


def cmd_identity_check(args) -> ExitStatus:
    config = load_config(IdentityCheckConfig, args.config, {
        "shoot": _shoot_overrides(args),
        "a_values": args.a_values,
        "residual_tolerance": args.residual_tolerance,
        "order_step": args.order_step,
        "min_ratio": args.min_ratio,
        "output_json": args.output_json,
    })
    entries = []
    for a in sorted(config.a_values):
        report = identity_report(shoot(float(a), config.shoot.step, config.shoot.r_max))
        coarse = abs(identity_report(shoot(float(a), config.order_step, config.shoot.r_max)).residual)
        fine = abs(identity_report(shoot(float(a), config.order_step / 2, config.shoot.r_max)).residual)
        resolved = coarse > RESIDUAL_FLOOR and fine > 0
        entries.append({
            "a": float(a),
            "lhs": report.lhs,
            "rhs_boundary": report.rhs_boundary,
            "I": report.I,
            "residual": report.residual,
            "residual_passed": abs(report.residual) < config.residual_tolerance,
            "order_step": config.order_step,
            "residual_at_order_step": coarse,
            "residual_at_half_order_step": fine,
            "observed_order": math.log2(coarse / fine) if resolved else None,
            "order_passed": coarse / fine >= config.min_ratio if resolved else None,
        })
    passed = all(entry["residual_passed"] for entry in entries)
    _dump_json({"passed": passed, "residual_tolerance": config.residual_tolerance, "step": config.shoot.step,
                "entries": entries}, config.output_json)
    return ExitStatus.OK if passed else ExitStatus.FAILURE


def cmd_verify(args) -> ExitStatus:
    config = load_config(VerifyConfig, args.config, {
        "n": args.n,
        "flow_n": args.flow_n,
        "order_grids": args.order_grids,
        "fixed_point_steps": args.fixed_point_steps,
        "fault": args.fault,
        "output_json": args.output_json,
    })
    unknown = set(config.tolerances).difference(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"Unknown invariants in tolerances: {sorted(unknown)}")
    report = run_invariant_suite(config)
    _emit_json(report.to_json(), config.output_json)
    if not report.passed:
        _logger.error(f"Failed invariants: {', '.join(report.failed)}")
        return ExitStatus.FAILURE
    return ExitStatus.OK


def cmd_diagnose(args) -> ExitStatus:
    config = load_config(DiagnoseConfig, args.config, {"profile_csv": args.profile_csv,
                                                       "output_json": args.output_json})
    try:
        metric = read_profile(config.profile_csv)
    except (CsvFormatError, InvalidProfileError) as e:
        raise ConfigError(f"Profile '{config.profile_csv}' rejected: {e}")
    field = curvature(metric)
    defects = boundary_defects(metric)
    document = {
        "n": metric.grid.n,
        "area": area(metric),
        "length": total_length(metric),
        "k_min": field.k_min,
        "k_max": field.k_max,
        "gb_defect": gauss_bonnet(metric),
        "boundary_defects": {"h_at_0": defects.h_at_0, "h_at_1": defects.h_at_1,
                             "slope_defect_0": defects.slope_defect_0, "slope_defect_1": defects.slope_defect_1},
        "admissible": is_admissible(metric),
        "r_bar": mean_scalar_curvature(metric),
        "entropy": entropy(metric),
        "einstein_defect": einstein_defect(metric),
    }
    _dump_json(document, config.output_json)
    return ExitStatus.OK


def _parser() -> ArgParser:
    parser = ArgParser(description="Rotationally symmetric Ricci flow and soliton laboratory on the 2-sphere")

    def command(name, help, handler):
        sub = parser.add_command(name, help=help)
        sub.add_argument("--config", help="YAML or JSON config document, flags override it")
        sub.set_defaults(handler=handler)
        return sub

    flow = command("flow", "Run the Ricci flow from an initial profile", cmd_flow)
    flow.add_argument("--family", choices=[family.value for family in ProfileFamily])
    flow.add_argument("--n", type=int, help="Grid size (odd, >= 9)")
    flow.add_argument("--eps", type=float)
    flow.add_argument("--k", type=int)
    flow.add_argument("--mode", choices=[mode.value for mode in FlowMode])
    flow.add_argument("--dt", type=float)
    flow.add_argument("--t-end", type=float)
    flow.add_argument("--record-every", type=int)
    flow.add_argument("--regrid-trigger", type=float)
    flow.add_argument("--convergence-tol", type=float)
    flow.add_argument("--diagnostics-csv")
    flow.add_argument("--snapshot-dir")
    flow.add_argument("--snapshot-every", type=int, help="Write a profile every this many records")

    def shoot_options(sub):
        sub.add_argument("--step", type=float, help="Integration step")
        sub.add_argument("--r-max", type=float, help="Integration limit")

    sweep_parser = command("soliton-sweep", "Shoot the soliton ODE for a grid of a values", cmd_soliton_sweep)
    shoot_options(sweep_parser)
    sweep_parser.add_argument("--a-values", type=float, nargs="+", help="Explicit a values (override the range)")
    sweep_parser.add_argument("--a-min", type=float)
    sweep_parser.add_argument("--a-max", type=float)
    sweep_parser.add_argument("--a-step", type=float)
    sweep_parser.add_argument("--workers", action=ArgparseCoreType, help="Parallel shoots, 0 for all cores")
    sweep_parser.add_argument("--output-csv")
    sweep_parser.add_argument("--trajectory-dir")

    solve = command("solve", "Find the a that closes the soliton profile", cmd_solve)
    shoot_options(solve)
    solve.add_argument("--a-lo", type=float)
    solve.add_argument("--a-hi", type=float)
    solve.add_argument("--tol", type=float, help="Tolerance of the minimization in a")
    solve.add_argument("--a-tolerance", type=float, help="Largest |a_star| accepted as zero")
    solve.add_argument("--n", type=int, help="Grid size of the closed profile")
    solve.add_argument("--output-json")

    identity = command("identity-check", "Check the integral identity along shooting trajectories",
                       cmd_identity_check)
    shoot_options(identity)
    identity.add_argument("--a-values", type=float, nargs="+")
    identity.add_argument("--residual-tolerance", type=float)
    identity.add_argument("--order-step", type=float, help="Coarse step of the order check")
    identity.add_argument("--min-ratio", type=float, help="Least residual ratio between order-step and its half")
    identity.add_argument("--output-json")

    verify = command("verify", "Run the invariant suite", cmd_verify)
    verify.add_argument("--n", type=int)
    verify.add_argument("--flow-n", type=int)
    verify.add_argument("--order-grids", type=int, nargs="+")
    verify.add_argument("--fixed-point-steps", type=int)
    verify.add_argument("--fault", choices=[fault.value for fault in Fault])
    verify.add_argument("--output-json")

    diagnose = command("diagnose", "Geometry of a profile CSV", cmd_diagnose)
    diagnose.add_argument("profile_csv")
    diagnose.add_argument("--output-json")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser()(argv)
    try:
        return int(args.handler(args))
    except ConfigError as e:
        _logger.error(f"Invalid config: {e}")
        return int(ExitStatus.INVALID_CONFIG)
    except OSError as e:
        _logger.error(f"I/O failure: {e}")
        return int(ExitStatus.IO_ERROR)
    except (RuntimeError, ValueError, ArithmeticError) as e:
        where = f" at t={e.t}" if hasattr(e, "t") else (f" at r={e.r}" if hasattr(e, "r") else "")
        _logger.error(f"Numerical failure{where}: {e}")
        return int(ExitStatus.FAILURE)


if __name__ == "__main__":
    sys.exit(main())
