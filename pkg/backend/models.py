"""
Domain types for the MPPT laboratory

Plain frozen dataclasses for the PV array model, the controller and the
scenario harness. Every type validates its invariants on construction and
raises DomainError when they are violated.
"""

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union


class DomainError(ValueError):
    """Raised when an input violates a documented precondition or invariant"""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


@dataclass(frozen=True)
class PvModuleParams:
    """Nameplate and single-diode constants of the simulated array"""

    isc_n: float
    voc_n: float
    imp_n: float
    vmp_n: float
    ki: float
    kv: float
    ns: int
    a: float
    rs: float
    rp: float
    g_n: float = 1000.0
    t_n: float = 298.15

    def __post_init__(self):
        _require(0 < self.imp_n < self.isc_n, "PvModuleParams requires 0 < imp_n < isc_n")
        _require(0 < self.vmp_n < self.voc_n, "PvModuleParams requires 0 < vmp_n < voc_n")
        _require(isinstance(self.ns, int) and self.ns >= 1, "PvModuleParams requires integer ns >= 1")
        _require(self.rs >= 0, "PvModuleParams requires rs >= 0")
        _require(self.rp > self.rs, "PvModuleParams requires rp > rs")
        _require(1.0 <= self.a <= 2.0, "PvModuleParams requires 1.0 <= a <= 2.0")
        _require(self.g_n > 0, "PvModuleParams requires g_n > 0")
        _require(self.t_n > 0, "PvModuleParams requires t_n > 0")

    @staticmethod
    def field_names() -> List[str]:
        return [f.name for f in fields(PvModuleParams)]

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.field_names()}


@dataclass(frozen=True)
class Environment:
    """Cell temperature (degrees C) and irradiance (W/m^2)"""

    t_celsius: float
    g: float

    def __post_init__(self):
        _require(self.g >= 0, f"irradiance g must be >= 0 (got {self.g})")
        _require(-40.0 <= self.t_celsius <= 90.0,
                 f"temperature t_celsius must lie in [-40, 90] (got {self.t_celsius})")

    @property
    def t_kelvin(self) -> float:
        return self.t_celsius + 273.15

    def to_dict(self) -> Dict[str, float]:
        return {"t_celsius": self.t_celsius, "g": self.g}


NOMINAL_ENVIRONMENT = Environment(t_celsius=25.0, g=1000.0)


@dataclass(frozen=True)
class OperatingPoint:
    v: float
    i: float

    @property
    def p(self) -> float:
        return self.v * self.i


@dataclass(frozen=True)
class MppResult:
    v_mp: float
    i_mp: float
    bracket_width: float

    @property
    def p_max(self) -> float:
        return self.v_mp * self.i_mp

    def to_dict(self) -> Dict[str, float]:
        return {"v_mp": self.v_mp, "i_mp": self.i_mp, "p_max": self.p_max}


@dataclass(frozen=True)
class Measurement:
    """
    Sensed voltage and current. The current goes negative only when the
    operating point sits above open circuit, where the array absorbs current.
    """

    v: float
    i: float

    def __post_init__(self):
        _require(self.v >= 0, f"measured voltage must be >= 0 (got {self.v})")

    @property
    def p(self) -> float:
        return self.v * self.i


class Direction(Enum):
    LEFT_OF_MPP = "LeftOfMpp"
    RIGHT_OF_MPP = "RightOfMpp"
    AT_MPP = "AtMpp"
    HOLD = "Hold"

    @property
    def sign(self) -> int:
        if self is Direction.LEFT_OF_MPP:
            return 1
        if self is Direction.RIGHT_OF_MPP:
            return -1
        return 0


@dataclass(frozen=True)
class FixedStep:
    step: float

    def __post_init__(self):
        _require(self.step > 0, f"fixed step must be > 0 (got {self.step})")


@dataclass(frozen=True)
class AdaptiveStep:
    # step-scaling gain, V^2/W
    m: float

    def __post_init__(self):
        _require(self.m > 0, f"adaptive gain m must be > 0 (got {self.m})")


StepPolicy = Union[FixedStep, AdaptiveStep]


@dataclass(frozen=True)
class IcConfig:
    policy: StepPolicy
    step_min: float = 1e-6
    step_max: float = 2.0
    step_init: float = 0.01
    eps_rel: float = 1e-6
    # relative current change tolerated as Hold when the voltage did not move
    eps_di: float = 1e-6
    eps_dv: float = 1e-12
    streak_required: int = 2

    def __post_init__(self):
        _require(isinstance(self.policy, (FixedStep, AdaptiveStep)),
                 "IcConfig policy must be FixedStep or AdaptiveStep")
        _require(0 < self.step_min <= self.step_init <= self.step_max,
                 "IcConfig requires 0 < step_min <= step_init <= step_max")
        _require(self.eps_rel > 0, "IcConfig requires eps_rel > 0")
        _require(self.eps_di > 0, "IcConfig requires eps_di > 0")
        _require(self.eps_dv >= 0, "IcConfig requires eps_dv >= 0")
        _require(isinstance(self.streak_required, int) and self.streak_required >= 1,
                 "IcConfig requires integer streak_required >= 1")

    @property
    def is_adaptive(self) -> bool:
        return isinstance(self.policy, AdaptiveStep)

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {"policy": "adaptive" if self.is_adaptive else "fixed"}
        if self.is_adaptive:
            doc["m"] = self.policy.m
        else:
            doc["step"] = self.policy.step
        doc.update({
            "step_min": self.step_min,
            "step_max": self.step_max,
            "step_init": self.step_init,
            "eps_rel": self.eps_rel,
            "eps_di": self.eps_di,
            "eps_dv": self.eps_dv,
            "streak_required": self.streak_required,
        })
        return doc


@dataclass(frozen=True)
class ControllerState:
    """Controller memory: previous sample, last step and convergence counters"""

    v_prev: float
    i_prev: float
    last_step: float = 0.0
    at_mpp_streak: int = 0
    iterations: int = 0
    last_direction: Optional[Direction] = None
    reversals: int = 0
    min_step_streak: int = 0

    def __post_init__(self):
        _require(self.last_step >= 0, "ControllerState requires last_step >= 0")
        _require(self.at_mpp_streak >= 0, "ControllerState requires at_mpp_streak >= 0")

    @property
    def p_prev(self) -> float:
        return self.v_prev * self.i_prev

    @classmethod
    def reset(cls, sample: Measurement) -> "ControllerState":
        return cls(v_prev=sample.v, i_prev=sample.i)


@dataclass(frozen=True)
class ScenarioSpec:
    params: PvModuleParams
    env_initial: Environment
    env_final: Environment
    config: IcConfig
    max_iterations: int = 20000
    oracle_v_tol: float = 1e-6

    def __post_init__(self):
        _require(isinstance(self.max_iterations, int) and self.max_iterations >= 1,
                 "ScenarioSpec requires max_iterations >= 1")
        _require(self.env_initial.g > 0, "ScenarioSpec requires env_initial.g > 0")
        _require(self.env_final.g > 0, "ScenarioSpec requires env_final.g > 0")
        _require(self.oracle_v_tol > 0, "ScenarioSpec requires oracle_v_tol > 0")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    v: float
    i: float
    step: float
    direction: Direction

    @property
    def p(self) -> float:
        return self.v * self.i


@dataclass(frozen=True)
class ScenarioResult:
    iterations_to_converge: int
    converged: bool
    p_final: float
    p_oracle: float
    error_pct: float
    p_initial: float
    env_initial: Environment
    env_final: Environment
    trace: Tuple[TraceRecord, ...] = field(default_factory=tuple)

    def summary(self) -> Dict[str, Any]:
        return {
            "converged": self.converged,
            "iterations": self.iterations_to_converge,
            "p_initial": self.p_initial,
            "p_final": self.p_final,
            "p_oracle": self.p_oracle,
            "error_pct": self.error_pct,
        }
