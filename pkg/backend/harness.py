"""
Scenario harness: step the environment, let the controller find the new MPP,
and score iterations and accuracy against the oracle
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import pandas as pd

import config
from models import (
    DomainError,
    Environment,
    IcConfig,
    Measurement,
    ControllerState,
    PvModuleParams,
    ScenarioResult,
    ScenarioSpec,
    TraceRecord,
)
from mppt import adaptive_config, fixed_config, is_converged, step_controller
from pv_model import NonConvergenceError, current_at_voltage, mpp_oracle, open_circuit_voltage

logger = logging.getLogger(__name__)

TABLE_NAMES = ('table_1', 'table_2', 'table_3')

# (t_initial, t_final, g_initial, g_final)
_TEMPERATURE_ROWS = [(25, 0, 1000, 1000), (50, 15, 1000, 1000), (12, 30, 1000, 1000), (5, 60, 1000, 1000)]
_IRRADIANCE_ROWS = [(0, 0, 600, 900), (0, 0, 1050, 170), (0, 0, 330, 970), (0, 0, 725, 575)]
_COMBINED_ROWS = [(45, 0, 200, 900), (-5, 20, 525, 725), (-12, 7, 1000, 250), (0, 50, 980, 50)]

REPORT_COLUMNS = [
    'label', 't_initial', 't_final', 'g_initial', 'g_final',
    'p_mpp_before', 'p_mpp_after',
    'fixed_accuracy_pct', 'adaptive_accuracy_pct',
    'fixed_iterations', 'adaptive_iterations', 'iteration_ratio',
]


class ScenarioError(RuntimeError):
    """The model failed while a scenario was running"""


@dataclass(frozen=True)
class TableRow:
    table: str
    label: str
    fixed: ScenarioSpec
    adaptive: ScenarioSpec


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    env_initial: Environment
    env_final: Environment
    p_mpp_before: float
    p_mpp_after: float
    fixed_accuracy_pct: float
    adaptive_accuracy_pct: float
    fixed_iterations: int
    adaptive_iterations: int

    @property
    def iteration_ratio(self) -> float:
        return self.adaptive_iterations / self.fixed_iterations


LabeledPair = Tuple[str, ScenarioResult, ScenarioResult]


def accuracy_pct(p_final: float, p_oracle: float) -> float:
    if not p_oracle > 0:
        raise DomainError(f"oracle power must be > 0 (got {p_oracle})")
    return abs(p_oracle - p_final) / p_oracle * 100.0


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    """
    Start at the exact MPP of env_initial, switch to env_final and iterate the
    controller until it converges or max_iterations updates have been spent.

    The reference voltage is clamped to [0, max(Voc(env_final), v_start)]: a
    temperature rise can leave the old MPP above the new open-circuit voltage,
    and the controller walks down from there through the extrapolated curve.
    """
    params, env_final, cfg = spec.params, spec.env_final, spec.config
    try:
        start = mpp_oracle(params, spec.env_initial, spec.oracle_v_tol)
        target = mpp_oracle(params, env_final, spec.oracle_v_tol)
        v_high = max(open_circuit_voltage(params, env_final), start.v_mp)

        state = ControllerState.reset(Measurement(start.v_mp, start.i_mp))
        v_ref = start.v_mp
        trace: List[TraceRecord] = []
        converged = False
        for iteration in range(1, spec.max_iterations + 1):
            meas = Measurement(v_ref, current_at_voltage(params, env_final, v_ref, extrapolate=True))
            out = step_controller(state, meas, cfg)
            trace.append(TraceRecord(iteration, meas.v, meas.i, out.step, out.direction))
            state = out.state
            # v_high may exceed Voc(env_final): the measurement above uses the
            # extrapolated current there, and clamping to Voc would cut the first step short
            v_ref = min(max(out.v_ref, 0.0), v_high)
            if is_converged(state, cfg):
                converged = True
                break
    except (NonConvergenceError, DomainError) as e:
        raise ScenarioError(
            f"scenario {spec.env_initial.to_dict()} -> {env_final.to_dict()} failed: {e}"
        ) from e

    p_final = trace[-1].p
    result = ScenarioResult(
        iterations_to_converge=state.iterations if converged else spec.max_iterations,
        converged=converged,
        p_final=p_final,
        p_oracle=target.p_max,
        error_pct=accuracy_pct(p_final, target.p_max),
        p_initial=start.p_max,
        env_initial=spec.env_initial,
        env_final=env_final,
        trace=tuple(trace),
    )
    if not converged:
        logger.warning("Scenario did not converge within %d iterations", spec.max_iterations)
    logger.info("Scenario %s -> %s: %d iterations, error %.3e %%",
                spec.env_initial.to_dict(), env_final.to_dict(),
                result.iterations_to_converge, result.error_pct)
    return result


def _rows_for(table: str, rows, params: PvModuleParams,
              fixed: IcConfig, adaptive: IcConfig, max_iterations: int) -> List[TableRow]:
    built = []
    for t0, t1, g0, g1 in rows:
        env_initial = Environment(t_celsius=float(t0), g=float(g0))
        env_final = Environment(t_celsius=float(t1), g=float(g1))
        if table == 'table_1':
            label = f"{t0} -> {t1} C"
        elif table == 'table_2':
            label = f"{g0} -> {g1} W/m2"
        else:
            label = f"{t0} -> {t1} C / {g0} -> {g1} W/m2"

        def spec(cfg: IcConfig) -> ScenarioSpec:
            return ScenarioSpec(params=params, env_initial=env_initial, env_final=env_final,
                                config=cfg, max_iterations=max_iterations)

        built.append(TableRow(table=table, label=label, fixed=spec(fixed), adaptive=spec(adaptive)))
    return built


def builtin_table_scenarios(params: PvModuleParams,
                            max_iterations: Optional[int] = None) -> List[TableRow]:
    """The twelve comparison rows, each paired with the fixed (0.01 V) and adaptive (m = 0.09) controller"""
    fixed, adaptive = fixed_config(0.01), adaptive_config(0.09)
    max_iterations = max_iterations or config.MAX_ITERATIONS
    return (
        _rows_for('table_1', _TEMPERATURE_ROWS, params, fixed, adaptive, max_iterations)
        + _rows_for('table_2', _IRRADIANCE_ROWS, params, fixed, adaptive, max_iterations)
        + _rows_for('table_3', _COMBINED_ROWS, params, fixed, adaptive, max_iterations)
    )


def _run_row(row: TableRow) -> LabeledPair:
    return row.label, run_scenario(row.fixed), run_scenario(row.adaptive)


def run_table(rows: Sequence[TableRow], workers: Optional[int] = None) -> List[LabeledPair]:
    """Run rows concurrently; results come back in row order"""
    workers = workers or config.TABLE_WORKERS
    if workers <= 1:
        return [_run_row(row) for row in rows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_row, rows))


def compare_report(results: Iterable[LabeledPair]) -> List[ComparisonRow]:
    report = []
    for entry in results:
        if not isinstance(entry, tuple) or len(entry) != 3:
            raise DomainError("compare_report expects (label, fixed, adaptive) triples")
        label, fixed, adaptive = entry
        if not isinstance(fixed, ScenarioResult) or not isinstance(adaptive, ScenarioResult):
            raise DomainError(f"row {label!r} is missing a fixed or adaptive result")
        if (fixed.env_initial, fixed.env_final) != (adaptive.env_initial, adaptive.env_final):
            raise DomainError(f"row {label!r} pairs results from different scenarios")
        report.append(ComparisonRow(
            label=label,
            env_initial=fixed.env_initial,
            env_final=fixed.env_final,
            p_mpp_before=fixed.p_initial,
            p_mpp_after=fixed.p_oracle,
            fixed_accuracy_pct=fixed.error_pct,
            adaptive_accuracy_pct=adaptive.error_pct,
            fixed_iterations=fixed.iterations_to_converge,
            adaptive_iterations=adaptive.iterations_to_converge,
        ))
    return report


def report_frame(rows: Iterable[ComparisonRow]) -> pd.DataFrame:
    records = [
        [
            r.label, r.env_initial.t_celsius, r.env_final.t_celsius, r.env_initial.g, r.env_final.g,
            r.p_mpp_before, r.p_mpp_after,
            r.fixed_accuracy_pct, r.adaptive_accuracy_pct,
            r.fixed_iterations, r.adaptive_iterations, r.iteration_ratio,
        ]
        for r in rows
    ]
    return pd.DataFrame(records, columns=REPORT_COLUMNS)


def fixed_step_tradeoff(params: PvModuleParams, env_initial: Environment, env_final: Environment,
                        steps: Sequence[float] = (0.01, 0.1)) -> List[Tuple[float, ScenarioResult]]:
    """Fixed-step runs of one scenario at several step sizes: speed against final accuracy"""
    return [
        (step, run_scenario(ScenarioSpec(params=params, env_initial=env_initial,
                                         env_final=env_final, config=fixed_config(step),
                                         max_iterations=config.MAX_ITERATIONS)))
        for step in steps
    ]
