import pandas as pd
import pytest

import harness
from harness import (
    REPORT_COLUMNS,
    ScenarioError,
    accuracy_pct,
    builtin_table_scenarios,
    compare_report,
    fixed_step_tradeoff,
    report_frame,
    run_scenario,
    run_table,
)
from models import Direction, DomainError, Environment, ScenarioSpec
from mppt import adaptive_config, fixed_config
from pv_model import NonConvergenceError, mpp_oracle, open_circuit_voltage

HOT = Environment(t_celsius=50.0, g=1000.0)
COLD = Environment(t_celsius=0.0, g=1000.0)


def scenario(params, env_initial, env_final, cfg, **kwargs):
    return ScenarioSpec(params=params, env_initial=env_initial, env_final=env_final, config=cfg, **kwargs)


@pytest.fixture(scope='module')
def table_results(params):
    rows = builtin_table_scenarios(params)
    return rows, run_table(rows, workers=4)


# --- accuracy -----------------------------------------------------------

def test_accuracy_examples():
    assert accuracy_pct(241.6751, 241.6751) == 0.0
    assert accuracy_pct(193.52 - 0.0316, 193.52) == pytest.approx(0.0163, abs=1e-4)
    assert accuracy_pct(235.4256, 241.6751) == pytest.approx(2.586, abs=1e-3)


def test_accuracy_needs_positive_oracle():
    with pytest.raises(DomainError):
        accuracy_pct(1.0, 0.0)


# --- single scenarios ---------------------------------------------------

def test_no_environment_change(params, nominal):
    for cfg in (fixed_config(0.01), adaptive_config(0.09)):
        result = run_scenario(scenario(params, nominal, nominal, cfg))
        assert result.converged
        assert result.iterations_to_converge <= cfg.streak_required + 2
        assert result.error_pct <= 1e-4


def test_fixed_step_cooling(params):
    result = run_scenario(scenario(params, HOT, COLD, fixed_config(0.01)))
    assert result.converged
    assert 540 <= result.iterations_to_converge <= 660
    assert result.error_pct <= 1e-4


def test_fixed_step_heating(params):
    result = run_scenario(scenario(params, COLD, HOT, fixed_config(0.01)))
    assert result.converged
    assert 540 <= result.iterations_to_converge <= 660
    assert result.error_pct <= 1e-4


def test_adaptive_cooling(params):
    result = run_scenario(scenario(params, HOT, COLD, adaptive_config(0.09)))
    assert result.converged
    assert result.iterations_to_converge <= 30
    assert result.error_pct <= 0.01


def test_adaptive_heating(params):
    result = run_scenario(scenario(params, COLD, HOT, adaptive_config(0.09)))
    assert result.converged
    assert result.iterations_to_converge <= 45
    assert result.error_pct <= 0.05


def test_result_fields_are_consistent(params):
    result = run_scenario(scenario(params, COLD, HOT, adaptive_config(0.09)))
    assert result.p_oracle == mpp_oracle(params, HOT).p_max
    assert result.p_initial == mpp_oracle(params, COLD).p_max
    assert result.p_final == result.trace[-1].p
    assert result.error_pct == accuracy_pct(result.trace[-1].p, result.p_oracle)
    assert len(result.trace) == result.iterations_to_converge
    assert result.summary()['iterations'] == result.iterations_to_converge


def test_trace_stays_in_window(params):
    for env_initial, env_final in ((HOT, COLD), (COLD, HOT)):
        result = run_scenario(scenario(params, env_initial, env_final, adaptive_config(0.09)))
        v_high = max(open_circuit_voltage(params, env_final), mpp_oracle(params, env_initial).v_mp)
        iterations = [r.iteration for r in result.trace]
        assert iterations == sorted(set(iterations))
        for record in result.trace:
            assert 0.0 <= record.v <= v_high
            assert record.p == record.v * record.i


def test_step_size_tradeoff(params):
    (fine_step, fine), (coarse_step, coarse) = fixed_step_tradeoff(params, HOT, COLD)
    assert (fine_step, coarse_step) == (0.01, 0.1)
    assert coarse.iterations_to_converge <= fine.iterations_to_converge / 8
    assert coarse.error_pct >= 10 * fine.error_pct


def test_iteration_budget_exhausted(params):
    result = run_scenario(scenario(params, HOT, COLD, fixed_config(0.01), max_iterations=25))
    assert not result.converged
    assert result.iterations_to_converge == 25
    assert len(result.trace) == 25


def test_runs_are_deterministic(params):
    spec = scenario(params, Environment(12.0, 1000.0), Environment(30.0, 1000.0), adaptive_config(0.09))
    assert run_scenario(spec).trace == run_scenario(spec).trace


def test_solver_failure_becomes_scenario_error(params, monkeypatch):
    def failing(*args, **kwargs):
        raise NonConvergenceError(25.0, 1.0, 200)

    monkeypatch.setattr(harness, 'current_at_voltage', failing)
    with pytest.raises(ScenarioError):
        run_scenario(scenario(params, HOT, COLD, fixed_config(0.01)))


# --- built-in tables ----------------------------------------------------

def test_builtin_rows(params):
    rows = builtin_table_scenarios(params)
    assert len(rows) == 12
    assert [row.table for row in rows] == ['table_1'] * 4 + ['table_2'] * 4 + ['table_3'] * 4
    assert rows[-1].fixed.env_final == Environment(t_celsius=50.0, g=50.0)
    assert rows[0].fixed.env_initial == Environment(t_celsius=25.0, g=1000.0)
    for row in rows:
        assert row.fixed.config.policy.step == 0.01
        assert row.adaptive.config.policy.m == 0.09
        assert (row.fixed.env_initial, row.fixed.env_final) == (row.adaptive.env_initial,
                                                                row.adaptive.env_final)


def test_table_results_keep_row_order(table_results):
    rows, pairs = table_results
    assert [label for label, _, _ in pairs] == [row.label for row in rows]
    for row, (_, fixed, adaptive) in zip(rows, pairs):
        assert fixed.env_final == row.fixed.env_final
        assert adaptive.env_final == row.adaptive.env_final


def test_adaptive_beats_fixed_on_every_row(table_results):
    _, pairs = table_results
    for label, fixed, adaptive in pairs:
        assert fixed.converged and adaptive.converged, label
        assert adaptive.iterations_to_converge < fixed.iterations_to_converge, label
        assert adaptive.iterations_to_converge <= max(0.35 * fixed.iterations_to_converge, 10), label
        assert adaptive.error_pct <= 0.05, label


def test_adaptive_approach_shrinks_on_temperature_rows(params, table_results):
    _, pairs = table_results
    for label, _, adaptive in pairs[:4]:
        v_mp = mpp_oracle(params, adaptive.env_final).v_mp
        offsets = [r.v - v_mp for r in adaptive.trace]
        distances = [abs(d) for d in offsets]
        # never farther on any update until the iterate first passes v_mp
        crossing = next(k for k in range(1, len(offsets)) if offsets[k] * offsets[0] < 0)
        for k in range(3, crossing):
            assert distances[k] <= distances[k - 1], (label, k)
        assert max(distances[3:]) <= max(distances[:3]), label
        assert distances[-1] <= 0.01, label


def test_current_shift_at_old_mpp_is_tracked(params):
    # the current at the old MPP voltage moves by under 3 %; the controller
    # must still leave it
    spec = scenario(params, Environment(-5.0, 525.0), Environment(20.0, 725.0), adaptive_config(0.09))
    result = run_scenario(spec)
    assert result.trace[0].direction is not Direction.HOLD
    assert result.converged
    assert result.iterations_to_converge > 2
    assert result.error_pct <= 0.05


def test_straddling_secant_is_not_convergence(params):
    # a 1.7 V step lands across the new MPP; the secant conductance happens to match there
    result = run_scenario(scenario(params, Environment(5.0, 1000.0), Environment(60.0, 1000.0),
                                   adaptive_config(0.09)))
    assert result.converged
    assert result.error_pct <= 0.05
    assert abs(result.trace[-1].v - mpp_oracle(params, result.env_final).v_mp) <= 0.01


def test_compare_report(table_results):
    _, pairs = table_results
    report = compare_report(pairs)
    assert len(report) == 12
    for row, (_, fixed, adaptive) in zip(report, pairs):
        assert row.p_mpp_before == fixed.p_initial
        assert row.p_mpp_after == fixed.p_oracle
        assert row.iteration_ratio == adaptive.iterations_to_converge / fixed.iterations_to_converge
        assert row.iteration_ratio < 1

    frame = report_frame(report)
    assert isinstance(frame, pd.DataFrame)
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == 12


def test_compare_report_edge_cases(table_results):
    _, pairs = table_results
    assert compare_report([]) == []
    label, fixed, _ = pairs[0]
    with pytest.raises(DomainError):
        compare_report([(label, fixed)])
    with pytest.raises(DomainError):
        compare_report([(label, fixed, None)])
    with pytest.raises(DomainError):
        compare_report([(label, fixed, pairs[1][2])])
