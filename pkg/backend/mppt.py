"""
Incremental-conductance MPPT controller

The controller compares the incremental conductance dI/dV with the negative
instantaneous conductance -I/V: equal at the maximum power point, larger to
its left, smaller to its right. The voltage reference moves by either a fixed
step or a step proportional to |dP/dV|. State transitions are pure functions.
"""

from dataclasses import replace
from typing import NamedTuple

from models import (
    AdaptiveStep,
    ControllerState,
    Direction,
    DomainError,
    FixedStep,
    IcConfig,
    Measurement,
)


FIXED_EPS_REL = 0.005
ADAPTIVE_STEP_MIN = 2.5e-3
DEFAULT_FIXED_STEP = 0.01
DEFAULT_M = 0.09


class ControlOutput(NamedTuple):
    v_ref: float
    state: ControllerState
    step: float
    direction: Direction


def fixed_config(step: float = DEFAULT_FIXED_STEP, **overrides) -> IcConfig:
    overrides.setdefault('eps_rel', FIXED_EPS_REL)
    return IcConfig(policy=FixedStep(step), **overrides)


def adaptive_config(m: float = DEFAULT_M, **overrides) -> IcConfig:
    """
    Adaptive policy with the exact conductance match. Convergence comes from
    the step floor: two consecutive steps at step_min mean |dP/dV| over a
    short secant is below step_min / m.
    """
    overrides.setdefault('step_min', ADAPTIVE_STEP_MIN)
    return IcConfig(policy=AdaptiveStep(m), **overrides)


def classify(state: ControllerState, meas: Measurement, cfg: IcConfig) -> Direction:
    """Where the measured point sits relative to the MPP"""
    if meas.v <= 0:
        raise DomainError(f"classification needs v > 0 (got {meas.v})")

    dv = meas.v - state.v_prev
    di = meas.i - state.i_prev

    if abs(dv) <= cfg.eps_dv:
        if abs(di) <= cfg.eps_di * abs(meas.i):
            return Direction.HOLD
        return Direction.LEFT_OF_MPP if di > 0 else Direction.RIGHT_OF_MPP

    conductance = meas.i / meas.v
    mismatch = di / dv + conductance
    if abs(mismatch) <= cfg.eps_rel * abs(conductance):
        return Direction.AT_MPP
    return Direction.LEFT_OF_MPP if mismatch > 0 else Direction.RIGHT_OF_MPP


def _advance(state: ControllerState, meas: Measurement, cfg: IcConfig,
             direction: Direction, step: float) -> ControlOutput:
    settled = direction in (Direction.AT_MPP, Direction.HOLD)

    last_direction = state.last_direction
    reversals = state.reversals
    if not settled:
        if last_direction is not None and last_direction is not direction:
            reversals += 1
        last_direction = direction

    min_step_streak = 0
    if cfg.is_adaptive and step <= cfg.step_min:
        min_step_streak = state.min_step_streak + 1

    new_state = replace(
        state,
        v_prev=meas.v,
        i_prev=meas.i,
        last_step=step,
        at_mpp_streak=state.at_mpp_streak + 1 if settled else 0,
        iterations=state.iterations + 1,
        last_direction=last_direction,
        reversals=reversals,
        min_step_streak=min_step_streak,
    )
    return ControlOutput(meas.v + direction.sign * step, new_state, step, direction)


def next_reference_fixed(state: ControllerState, meas: Measurement, cfg: IcConfig) -> ControlOutput:
    if cfg.is_adaptive:
        raise DomainError("next_reference_fixed needs a fixed step policy")
    direction = classify(state, meas, cfg)
    return _advance(state, meas, cfg, direction, cfg.policy.step)


def _clamp(value: float, cfg: IcConfig) -> float:
    return min(max(value, cfg.step_min), cfg.step_max)


def next_reference_adaptive(state: ControllerState, meas: Measurement, cfg: IcConfig) -> ControlOutput:
    """
    Step = clamp(m * |dP/dV|, step_min, step_max). Without a voltage change
    there is no slope: the first update after a reset uses step_init, later
    ones repeat the last step.
    """
    if not cfg.is_adaptive:
        raise DomainError("next_reference_adaptive needs an adaptive step policy")
    direction = classify(state, meas, cfg)

    dv = meas.v - state.v_prev
    if abs(dv) <= cfg.eps_dv:
        step = cfg.step_init if state.iterations == 0 else _clamp(state.last_step, cfg)
    else:
        dp = meas.p - state.p_prev
        step = _clamp(cfg.policy.m * abs(dp / dv), cfg)
    return _advance(state, meas, cfg, direction, step)


def step_controller(state: ControllerState, meas: Measurement, cfg: IcConfig) -> ControlOutput:
    if cfg.is_adaptive:
        return next_reference_adaptive(state, meas, cfg)
    return next_reference_fixed(state, meas, cfg)


def is_converged(state: ControllerState, cfg: IcConfig) -> bool:
    if state.at_mpp_streak >= cfg.streak_required:
        return True
    if cfg.is_adaptive:
        return state.min_step_streak >= cfg.streak_required
    # A fixed step can straddle the MPP without landing on it
    return state.reversals >= cfg.streak_required
