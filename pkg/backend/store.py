"""
JSON and CSV persistence for parameter fixtures, scenarios, traces and tables
"""

import json
import logging
import os
from functools import lru_cache
from typing import Any, Dict, Iterable, Optional

import pandas as pd

import config
from models import (
    DomainError,
    Environment,
    IcConfig,
    PvModuleParams,
    ScenarioSpec,
    TraceRecord,
)
from mppt import adaptive_config, fixed_config
from pv_model import calibrate_rs_rp

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['iteration', 'v_volts', 'i_amps', 'p_watts', 'step_volts', 'direction']
OPTIONAL_CONFIG_KEYS = ('step_min', 'step_max', 'step_init', 'eps_rel', 'eps_di', 'eps_dv')


class LoadError(DomainError):
    """A parameter or scenario document is missing a key or carries a bad value"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


def _number(doc: Dict[str, Any], key: str, context: str) -> float:
    if key not in doc:
        raise LoadError(f"{context}: missing field '{key}'", key)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise LoadError(f"{context}: field '{key}' must be a number (got {value!r})", key)
    return float(value)


def _integer(doc: Dict[str, Any], key: str, context: str) -> int:
    if key not in doc:
        raise LoadError(f"{context}: missing field '{key}'", key)
    value = doc[key]
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise LoadError(f"{context}: field '{key}' must be an integer (got {value!r})", key)
    return value


def _mapping(doc: Any, key: str, context: str) -> Dict[str, Any]:
    if not isinstance(doc, dict):
        raise LoadError(f"{context}: field '{key}' must be an object", key)
    return doc


def _build(factory, context: str, **kwargs):
    try:
        return factory(**kwargs)
    except LoadError:
        raise
    except DomainError as e:
        raise LoadError(f"{context}: {e}") from e


def params_from_dict(doc: Any) -> PvModuleParams:
    doc = _mapping(doc, 'params', 'params')
    values = {}
    for name in PvModuleParams.field_names():
        if name == 'ns':
            values[name] = _integer(doc, name, 'params')
        else:
            values[name] = _number(doc, name, 'params')
    return _build(PvModuleParams, 'params', **values)


def environment_from_dict(doc: Any, key: str) -> Environment:
    doc = _mapping(doc, key, key)
    return _build(Environment, key,
                  t_celsius=_number(doc, 't_celsius', key),
                  g=_number(doc, 'g', key))


def config_from_dict(doc: Any) -> IcConfig:
    doc = _mapping(doc, 'config', 'config')
    if 'policy' not in doc:
        raise LoadError("config: missing field 'policy'", 'policy')
    policy = doc['policy']

    overrides = {key: _number(doc, key, 'config') for key in OPTIONAL_CONFIG_KEYS if key in doc}
    if 'streak_required' in doc:
        overrides['streak_required'] = _integer(doc, 'streak_required', 'config')

    if policy == 'fixed':
        step = _number(doc, 'step', 'config')
        return _build(fixed_config, 'config', step=step, **overrides)
    if policy == 'adaptive':
        m = _number(doc, 'm', 'config')
        return _build(adaptive_config, 'config', m=m, **overrides)
    raise LoadError(f"config: field 'policy' must be 'fixed' or 'adaptive' (got {policy!r})", 'policy')


def scenario_from_dict(doc: Any, default: Optional[PvModuleParams] = None) -> ScenarioSpec:
    doc = _mapping(doc, 'scenario', 'scenario')
    if 'params' in doc:
        params = params_from_dict(doc['params'])
    else:
        params = default if default is not None else default_params()

    for key in ('env_initial', 'env_final', 'config'):
        if key not in doc:
            raise LoadError(f"scenario: missing field '{key}'", key)

    extra = {}
    if 'max_iterations' in doc:
        extra['max_iterations'] = _integer(doc, 'max_iterations', 'scenario')
    if 'oracle_v_tol' in doc:
        extra['oracle_v_tol'] = _number(doc, 'oracle_v_tol', 'scenario')

    return _build(
        ScenarioSpec, 'scenario',
        params=params,
        env_initial=environment_from_dict(doc['env_initial'], 'env_initial'),
        env_final=environment_from_dict(doc['env_final'], 'env_final'),
        config=config_from_dict(doc['config']),
        **extra,
    )


def _read_json(path: str) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            return json.load(fh)
    except OSError as e:
        raise LoadError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise LoadError(f"{path} is not valid JSON: {e.msg} (line {e.lineno})") from e


def load_params(path: str) -> PvModuleParams:
    return params_from_dict(_read_json(path))


def save_params(params: PvModuleParams, path: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write(json.dumps(params.to_dict(), indent=2))
        fh.write('\n')


def load_scenario(path: str, default: Optional[PvModuleParams] = None) -> ScenarioSpec:
    return scenario_from_dict(_read_json(path), default)


@lru_cache(maxsize=1)
def default_params() -> PvModuleParams:
    """
    Parameters used when no --params file is given: MPPT_PARAMS_FILE as-is,
    otherwise the bundled KC200GT seed calibrated to MPPT_TARGET_PMAX.
    """
    if config.PARAMS_FILE:
        logger.info("Loading parameters from %s", config.PARAMS_FILE)
        return load_params(config.PARAMS_FILE)
    seed = load_params(config.SEED_PARAMS_FILE)
    return calibrate_rs_rp(seed, config.TARGET_PMAX)


def trace_frame(trace: Iterable[TraceRecord]) -> pd.DataFrame:
    rows = [
        [r.iteration, r.v, r.i, r.p, r.step, r.direction.value]
        for r in trace
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_csv(frame: pd.DataFrame, target) -> None:
    """Locale-independent CSV, '\\n' line endings, shortest round-trip floats"""
    if isinstance(target, (str, os.PathLike)):
        with open(target, 'w', encoding='utf-8', newline='') as fh:
            frame.to_csv(fh, index=False, lineterminator='\n')
    else:
        frame.to_csv(target, index=False, lineterminator='\n')


def write_trace_csv(trace: Iterable[TraceRecord], target) -> None:
    write_csv(trace_frame(trace), target)
