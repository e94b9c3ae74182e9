"""
Single-diode PV array model

Evaluates the implicit I-V equation

    I = Ipv - I0 * (exp((V + Rs*I) / (a*Vt)) - 1) - (V + Rs*I) / Rp

under arbitrary temperature and irradiance, locates open circuit and the
maximum power point, and calibrates Rs/Rp so the model reaches a target
peak power.
"""

import logging
import math
from dataclasses import replace
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import constants
from scipy.optimize import bisect

from models import (
    NOMINAL_ENVIRONMENT,
    DomainError,
    Environment,
    MppResult,
    OperatingPoint,
    PvModuleParams,
)

logger = logging.getLogger(__name__)

BOLTZMANN = constants.k          # 1.380649e-23 J/K
ELEMENTARY_CHARGE = constants.e  # 1.602176634e-19 C

# Solver limits
RESIDUAL_TARGET = 1e-12
RESIDUAL_LIMIT = 1e-9
NEWTON_MAX_ITERATIONS = 50
SOLVER_MAX_ITERATIONS = 200
NEWTON_DAMPING = 0.5
VOC_RANGE_FACTOR = 1.05

DEFAULT_V_TOL = 1e-6
INV_PHI = (math.sqrt(5) - 1) / 2

# Calibration
LOSSLESS_RP = 1e9
CALIBRATION_HEADROOM = 0.005
CALIBRATION_RS_STEP = 1e-3
CALIBRATION_RS_MAX = 1.0
FIXED_POINT_RTOL = 1e-6


class NonConvergenceError(RuntimeError):
    """Both current solvers ran out of iterations"""

    def __init__(self, v: float, residual: float, iterations: int):
        super().__init__(
            f"current solver did not converge at v={v!r} after {iterations} "
            f"iterations (residual {residual:.3e} A)"
        )
        self.v = v
        self.residual = residual
        self.iterations = iterations


class CalibrationError(DomainError):
    """No Rs/Rp pair in the sweep range satisfies the target"""


class DiodeConstants(NamedTuple):
    ipv: float
    i0: float
    vt: float


def effective_constants(params: PvModuleParams, env: Environment) -> DiodeConstants:
    """Light current, saturation current and array thermal voltage at env"""
    t_kelvin = env.t_kelvin
    delta_t = t_kelvin - params.t_n
    vt = params.ns * BOLTZMANN * t_kelvin / ELEMENTARY_CHARGE
    ipv_n = params.isc_n * (params.rp + params.rs) / params.rp
    ipv = (ipv_n + params.ki * delta_t) * env.g / params.g_n
    i0 = (params.isc_n + params.ki * delta_t) / math.expm1(
        (params.voc_n + params.kv * delta_t) / (params.a * vt)
    )
    if i0 <= 0 or ipv < 0:
        raise DomainError(
            f"temperature {env.t_celsius} C drives the diode constants out of range "
            f"(ipv={ipv}, i0={i0})"
        )
    return DiodeConstants(ipv=ipv, i0=i0, vt=vt)


def _residual(params: PvModuleParams, consts: DiodeConstants, v: float, i: float) -> float:
    vd = v + params.rs * i
    try:
        diode = consts.i0 * math.expm1(vd / (params.a * consts.vt))
    except OverflowError:
        return -math.inf
    return consts.ipv - diode - vd / params.rp - i


def _slope(params: PvModuleParams, consts: DiodeConstants, v: float, i: float) -> float:
    a_vt = params.a * consts.vt
    try:
        diode = consts.i0 * math.exp((v + params.rs * i) / a_vt)
    except OverflowError:
        return -math.inf
    return -diode * params.rs / a_vt - params.rs / params.rp - 1.0


def _lossless_current(params: PvModuleParams, consts: DiodeConstants, v):
    """Current with Rs removed; it bounds the true current from below"""
    return consts.ipv - consts.i0 * np.expm1(v / (params.a * consts.vt)) - v / params.rp


def _solve_current(params: PvModuleParams, consts: DiodeConstants, v: float) -> float:
    i = consts.ipv
    r = _residual(params, consts, v, i)
    iterations = 0

    # Damped Newton; the residual is strictly decreasing in i
    while iterations < NEWTON_MAX_ITERATIONS and abs(r) > RESIDUAL_TARGET:
        iterations += 1
        step = r / _slope(params, consts, v, i)
        if not math.isfinite(step):
            break
        candidate = i - step
        r_new = _residual(params, consts, v, candidate)
        damping = 1.0
        while abs(r_new) > abs(r) and damping > 1e-6:
            damping *= NEWTON_DAMPING
            candidate = i - damping * step
            r_new = _residual(params, consts, v, candidate)
        if abs(r_new) >= abs(r):
            break
        i, r = candidate, r_new

    if abs(r) <= RESIDUAL_LIMIT:
        return i

    logger.debug("Newton stalled at v=%r (residual %.3e), falling back to bisection", v, r)
    lo = min(-params.isc_n, float(_lossless_current(params, consts, v)))
    hi = consts.ipv + 1.0
    best_i, best_r = i, r
    while iterations < SOLVER_MAX_ITERATIONS:
        iterations += 1
        mid = 0.5 * (lo + hi)
        r_mid = _residual(params, consts, v, mid)
        if abs(r_mid) < abs(best_r):
            best_i, best_r = mid, r_mid
        if abs(r_mid) <= RESIDUAL_TARGET or mid in (lo, hi):
            break
        if r_mid > 0:
            lo = mid
        else:
            hi = mid

    if abs(best_r) > RESIDUAL_LIMIT:
        raise NonConvergenceError(v, best_r, iterations)
    return best_i


def _check_voltage(params: PvModuleParams, env: Environment, v: float, extrapolate: bool) -> None:
    if not math.isfinite(v) or v < 0:
        raise DomainError(f"voltage must be finite and >= 0 (got {v})")
    if extrapolate:
        return
    voc = open_circuit_voltage(params, env) if env.g > 0 else 0.0
    limit = VOC_RANGE_FACTOR * voc
    if v > limit:
        raise DomainError(
            f"voltage {v} V lies above {VOC_RANGE_FACTOR} x open-circuit voltage ({limit} V)"
        )


def current_at_voltage(params: PvModuleParams, env: Environment, v: float,
                       *, extrapolate: bool = False) -> float:
    """
    Terminal current at voltage v.

    With extrapolate=True the range check against open circuit is skipped and
    the diode equation is continued above Voc, where the current is negative.
    """
    _check_voltage(params, env, v, extrapolate)
    return _solve_current(params, effective_constants(params, env), v)


def power_at_voltage(params: PvModuleParams, env: Environment, v: float,
                     *, extrapolate: bool = False) -> float:
    return v * current_at_voltage(params, env, v, extrapolate=extrapolate)


def current_at_voltages(params: PvModuleParams, env: Environment, v,
                        *, extrapolate: bool = False) -> np.ndarray:
    """Vectorised current solve: Newton steps kept inside a shrinking bracket"""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size and (not np.all(np.isfinite(v)) or np.min(v) < 0):
        raise DomainError("voltages must be finite and >= 0")
    if v.size and not extrapolate:
        _check_voltage(params, env, float(np.max(v)), extrapolate=False)

    consts = effective_constants(params, env)
    a_vt = params.a * consts.vt

    def residual(va, ia):
        vd = va + params.rs * ia
        return consts.ipv - consts.i0 * np.expm1(vd / a_vt) - vd / params.rp - ia

    lo = np.minimum(-params.isc_n, _lossless_current(params, consts, v))
    hi = np.full_like(v, consts.ipv + 1.0)
    i = np.full_like(v, consts.ipv)
    active = np.arange(v.size)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(SOLVER_MAX_ITERATIONS):
            va, ia = v[active], i[active]
            f = residual(va, ia)
            pending = np.abs(f) > RESIDUAL_TARGET
            active, va, ia, f = active[pending], va[pending], ia[pending], f[pending]
            if not active.size:
                break

            lo[active] = np.where(f > 0, ia, lo[active])
            hi[active] = np.where(f < 0, ia, hi[active])
            vd = va + params.rs * ia
            df = -consts.i0 * np.exp(vd / a_vt) * params.rs / a_vt - params.rs / params.rp - 1.0
            newton = ia - f / df
            inside = (newton > lo[active]) & (newton < hi[active])
            updated = np.where(inside, newton, 0.5 * (lo[active] + hi[active]))

            i[active] = updated
            # entries whose iterate no longer moves are as close as floats allow
            active = active[updated != ia]

        f = residual(v, i)

    if v.size:
        worst = int(np.argmax(np.abs(f)))
        if not abs(f[worst]) <= RESIDUAL_LIMIT:
            raise NonConvergenceError(float(v[worst]), float(f[worst]), SOLVER_MAX_ITERATIONS)
    return i


def open_circuit_voltage(params: PvModuleParams, env: Environment) -> float:
    if env.g <= 0:
        raise DomainError("irradiance g must be > 0: no open-circuit point at zero irradiance")
    consts = effective_constants(params, env)
    return bisect(lambda v: _solve_current(params, consts, v),
                  0.0, 2.0 * params.voc_n, xtol=1e-12, maxiter=SOLVER_MAX_ITERATIONS)


def iv_curve(params: PvModuleParams, env: Environment, n_points: int) -> List[OperatingPoint]:
    if n_points < 2:
        raise DomainError(f"n_points must be >= 2 (got {n_points})")
    voc = open_circuit_voltage(params, env)
    voltages = np.linspace(0.0, voc, n_points)
    currents = current_at_voltages(params, env, voltages, extrapolate=True)
    return [OperatingPoint(v=float(v), i=float(i)) for v, i in zip(voltages, currents)]


def mpp_oracle(params: PvModuleParams, env: Environment,
               v_tol: float = DEFAULT_V_TOL) -> MppResult:
    """Golden-section search for the maximum of p(v) on [0, Voc]"""
    if v_tol <= 0:
        raise DomainError(f"v_tol must be > 0 (got {v_tol})")
    voc = open_circuit_voltage(params, env)
    consts = effective_constants(params, env)

    def power(v: float) -> float:
        return v * _solve_current(params, consts, v)

    a, b = 0.0, voc
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    pc, pd = power(c), power(d)
    while b - a > v_tol:
        if pc > pd:
            b, d, pd = d, c, pc
            c = b - INV_PHI * (b - a)
            pc = power(c)
        else:
            a, c, pc = c, d, pd
            d = a + INV_PHI * (b - a)
            pd = power(d)

    _, v_mp = max((pc, c), (pd, d), (power(a), a), (power(b), b))
    return MppResult(v_mp=v_mp, i_mp=_solve_current(params, consts, v_mp), bracket_width=b - a)


def _lossless(params: PvModuleParams, a: float) -> PvModuleParams:
    return replace(params, a=a, rs=0.0, rp=LOSSLESS_RP)


def _forced_rp(params: PvModuleParams, env: Environment, a: float, rs: float,
               v_f: float, i_f: float) -> Optional[float]:
    """Rp that puts (v_f, i_f) on the curve; None when no positive Rp > Rs does"""
    target = v_f * i_f
    rp = LOSSLESS_RP
    for _ in range(50):
        consts = effective_constants(replace(params, a=a, rs=rs, rp=rp), env)
        vd = v_f + i_f * rs
        denominator = v_f * consts.ipv - v_f * consts.i0 * math.expm1(vd / (a * consts.vt)) - target
        if denominator <= 0:
            return None
        updated = v_f * vd / denominator
        if updated <= rs:
            return None
        if abs(updated - rp) <= 1e-12 * updated:
            return updated
        rp = updated
    return rp


def calibrate_rs_rp(params: PvModuleParams, target_pmax: float,
                    env: Environment = NOMINAL_ENVIRONMENT,
                    *, rs_step: float = CALIBRATION_RS_STEP,
                    rs_max: float = CALIBRATION_RS_MAX,
                    headroom: float = CALIBRATION_HEADROOM,
                    v_tol: float = DEFAULT_V_TOL) -> PvModuleParams:
    """
    Fit Rs and Rp so the model peak power at env matches target_pmax.

    When the lossless curve (Rs = 0, Rp -> inf) at the current ideality factor
    cannot reach target * (1 + headroom), the ideality factor is lowered by
    bisection first. The curve is then forced through the target power at the
    lossless MPP voltage and Rs is swept upward from zero, Rp following from
    the closed form, until the peak-power error stops shrinking.
    When the error already grows at the first Rs step the result keeps Rs = 0
    and the fit is carried by the ideality factor and Rp alone; the KC200GT
    seed at 217.54 W ends there.
    """
    if not target_pmax > 0:
        raise DomainError(f"target_pmax must be > 0 (got {target_pmax})")
    if env.g <= 0:
        raise DomainError("calibration needs irradiance g > 0")

    current = mpp_oracle(params, env, v_tol).p_max
    if abs(current - target_pmax) <= FIXED_POINT_RTOL * target_pmax:
        logger.info("Calibration: model already at %.6f W, parameters unchanged", current)
        return params

    goal = target_pmax * (1.0 + headroom)
    a = params.a
    if mpp_oracle(_lossless(params, a), env, v_tol).p_max < goal:
        if mpp_oracle(_lossless(params, 1.0), env, v_tol).p_max < goal:
            raise CalibrationError(
                f"target {target_pmax} W exceeds the lossless ceiling even at ideality 1.0"
            )
        lo, hi = 1.0, a
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mpp_oracle(_lossless(params, mid), env, v_tol).p_max >= goal:
                lo = mid
            else:
                hi = mid
        a = lo
        logger.info("Calibration: ideality factor lowered from %s to %.6f", params.a, a)

    v_f = mpp_oracle(_lossless(params, a), env, v_tol).v_mp
    i_f = target_pmax / v_f

    best: Optional[PvModuleParams] = None
    best_error = math.inf
    k = 0
    while k * rs_step <= rs_max:
        rs = k * rs_step
        rp = _forced_rp(params, env, a, rs, v_f, i_f)
        if rp is None:
            break
        candidate = replace(params, a=a, rs=rs, rp=rp)
        error = abs(mpp_oracle(candidate, env, v_tol).p_max - target_pmax)
        if error > best_error:
            break
        best, best_error = candidate, error
        k += 1

    if best is None:
        raise CalibrationError(f"no rs in [0, {rs_max}] gives rp > rs for target {target_pmax} W")
    if best.rs == 0.0:
        logger.info("Calibration: Rs sweep stopped at Rs = 0, only a and Rp were fitted")
    logger.info("Calibration: rs=%.4f ohm rp=%.3f ohm a=%.6f (|error| %.3e W)",
                best.rs, best.rp, best.a, best_error)
    return best
