"""
Command-line entry point for the MPPT lab

    python cli.py curve --temp 25 --irradiance 1000 --points 200
    python cli.py mpp --temp 50 --irradiance 1000
    python cli.py run --t0 50 --t1 0 --controller adaptive --m 0.09
    python cli.py tables --out results/
    python cli.py calibrate --target-pmax 217.54 --out params.json

Exit codes: 0 success, 1 usage error, 2 scenario did not converge,
3 invalid input or file.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import pandas as pd

import config
import store
from harness import (
    TABLE_NAMES,
    ScenarioError,
    builtin_table_scenarios,
    compare_report,
    report_frame,
    run_scenario,
    run_table,
)
from models import DomainError, Environment, PvModuleParams, ScenarioSpec
from mppt import DEFAULT_FIXED_STEP, DEFAULT_M, adaptive_config, fixed_config
from pv_model import NonConvergenceError, calibrate_rs_rp, iv_curve, mpp_oracle

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_INVALID = 3


class UsageError(Exception):
    pass


class LabArgumentParser(argparse.ArgumentParser):
    """argparse parser that reports usage errors with exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_env_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--temp', type=float, default=25.0, help='cell temperature, degrees C')
    parser.add_argument('--irradiance', type=float, default=1000.0, help='irradiance, W/m^2')


def _add_params_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--params', help='parameter JSON file (default: calibrated KC200GT)')


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog='mppt-lab', description='PV MPPT simulation lab')
    parser.add_argument('--log-level', default=None, help='override LOG_LEVEL')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=LabArgumentParser)

    curve = sub.add_parser('curve', help='I-V / P-V curve as CSV')
    _add_env_flags(curve)
    curve.add_argument('--points', type=int, default=100)
    _add_params_flag(curve)
    curve.add_argument('--out', help='CSV file (default: stdout)')

    mpp = sub.add_parser('mpp', help='oracle maximum power point as JSON')
    _add_env_flags(mpp)
    _add_params_flag(mpp)

    run = sub.add_parser('run', help='run one step-change scenario')
    run.add_argument('--scenario', help='scenario JSON file')
    run.add_argument('--t0', type=float, help='initial temperature, degrees C')
    run.add_argument('--t1', type=float, help='final temperature, degrees C')
    run.add_argument('--g0', type=float, default=1000.0, help='initial irradiance, W/m^2')
    run.add_argument('--g1', type=float, default=1000.0, help='final irradiance, W/m^2')
    run.add_argument('--controller', choices=['fixed', 'adaptive'], default='fixed')
    run.add_argument('--step', type=float, default=DEFAULT_FIXED_STEP, help='fixed step, V')
    run.add_argument('--m', type=float, default=DEFAULT_M, help='adaptive gain, V^2/W')
    run.add_argument('--max-iterations', type=int, default=None)
    run.add_argument('--trace', help='write the phase-2 trace CSV here')
    _add_params_flag(run)

    tables = sub.add_parser('tables', help='reproduce the three comparison tables')
    tables.add_argument('--out', default='.', help='output directory')
    tables.add_argument('--workers', type=int, default=None)
    _add_params_flag(tables)

    calibrate = sub.add_parser('calibrate', help='fit rs/rp to a target peak power')
    calibrate.add_argument('--target-pmax', type=float, default=config.TARGET_PMAX)
    _add_env_flags(calibrate)
    calibrate.add_argument('--params', help='parameter JSON to calibrate (default: KC200GT seed)')
    calibrate.add_argument('--out', help='output JSON file (default: stdout)')

    return parser


def _params(args) -> PvModuleParams:
    if args.params:
        return store.load_params(args.params)
    return store.default_params()


def _env(args) -> Environment:
    return Environment(t_celsius=args.temp, g=args.irradiance)


def _emit_json(doc) -> None:
    sys.stdout.write(json.dumps(doc))
    sys.stdout.write('\n')


def cmd_curve(args) -> int:
    points = iv_curve(_params(args), _env(args), args.points)
    frame = pd.DataFrame([[pt.v, pt.i, pt.p] for pt in points], columns=['v', 'i', 'p'])
    store.write_csv(frame, args.out or sys.stdout)
    return EXIT_OK


def cmd_mpp(args) -> int:
    _emit_json(mpp_oracle(_params(args), _env(args), config.ORACLE_V_TOL).to_dict())
    return EXIT_OK


def _scenario(args) -> ScenarioSpec:
    if args.scenario:
        default = store.load_params(args.params) if args.params else None
        return store.load_scenario(args.scenario, default)

    if args.t0 is None or args.t1 is None:
        raise UsageError("run needs --scenario or both --t0 and --t1")
    if args.controller == 'fixed':
        cfg = fixed_config(args.step)
    else:
        cfg = adaptive_config(args.m)
    return ScenarioSpec(
        params=_params(args),
        env_initial=Environment(t_celsius=args.t0, g=args.g0),
        env_final=Environment(t_celsius=args.t1, g=args.g1),
        config=cfg,
        max_iterations=args.max_iterations or config.MAX_ITERATIONS,
        oracle_v_tol=config.ORACLE_V_TOL,
    )


def cmd_run(args) -> int:
    result = run_scenario(_scenario(args))
    if args.trace:
        store.write_trace_csv(result.trace, args.trace)
    _emit_json(result.summary())
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_tables(args) -> int:
    rows = builtin_table_scenarios(_params(args))
    pairs = run_table(rows, args.workers)
    os.makedirs(args.out, exist_ok=True)
    for name in TABLE_NAMES:
        selected = [pair for row, pair in zip(rows, pairs) if row.table == name]
        path = os.path.join(args.out, f"{name}.csv")
        store.write_csv(report_frame(compare_report(selected)), path)
        logger.info("Wrote %s (%d rows)", path, len(selected))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    seed = store.load_params(args.params or config.SEED_PARAMS_FILE)
    calibrated = calibrate_rs_rp(seed, args.target_pmax, _env(args))
    if args.out:
        store.save_params(calibrated, args.out)
    else:
        _emit_json(calibrated.to_dict())
    return EXIT_OK


COMMANDS = {
    'curve': cmd_curve,
    'mpp': cmd_mpp,
    'run': cmd_run,
    'tables': cmd_tables,
    'calibrate': cmd_calibrate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config.configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ScenarioError, NonConvergenceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
