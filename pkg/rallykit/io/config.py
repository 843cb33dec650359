import hashlib
import json
import logging
from dataclasses import dataclass, field, fields, is_dataclass, asdict, replace
from pathlib import Path
from typing import *

import numpy as np
import yaml

from .._helpers import ConfigError, DomainError
from ..chassis import CalibrationTable
from ..mppi import MppiParams
from ..sim import ClosedLoopConfig, SensorConfig
from ..smoother import SmootherConfig
from ..tire import MagicFormulaParams
from ..vehicle import PRESETS, STATE3_FIELDS, vehicle_preset, VehicleParams

__all__ = [
    'VehicleSection',
    'TireSection',
    'TrackSection',
    'ExcitationSection',
    'EstimatorSection',
    'MoiAxis',
    'MoiSection',
    'ExperimentConfig',
    'load_config',
    'parse_config',
    'dump_config',
    'config_hash',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VehicleSection:
    preset: str = 'autorally'
    overrides: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f'unknown vehicle preset {self.preset!r}, expected one of {sorted(PRESETS)}')

    def params(self, full: bool = False) -> VehicleParams:
        try:
            return vehicle_preset(self.preset, full=full, **self.overrides)
        except KeyError as e:
            raise ConfigError(f'vehicle: {e.args[0]}') from None
        except DomainError as e:
            raise ConfigError(f'vehicle: {e}') from None


@dataclass(frozen=True)
class TireSection:
    friction_scale: float = 1.0
    B: float = MagicFormulaParams.B
    C: float = MagicFormulaParams.C
    D: float = MagicFormulaParams.D
    E: float = MagicFormulaParams.E
    S_h: float = MagicFormulaParams.S_h
    S_v: float = MagicFormulaParams.S_v

    def params(self) -> MagicFormulaParams:
        return MagicFormulaParams(self.B, self.C, self.D, self.E, self.S_h, self.S_v).scaled(self.friction_scale)


@dataclass(frozen=True)
class TrackSection:
    straight_length: float = 11.5
    width: float = 3.3
    outer_length: float = 27.5
    outer_width: float = 15.5
    resolution: float = 0.05
    margin: float = 0.3
    padding: float = 2.0
    tolerance: float = 0.6


@dataclass(frozen=True)
class ExcitationSection:
    speed: float = 3.0
    amplitude: float = 0.3
    period: float = 2.0
    lookahead: float = 2.0
    gain: float = 0.5


@dataclass(frozen=True)
class EstimatorSection:
    """Joint-state filter run on the `odom` stream of a log.

    `observation_sigma` None takes the odometry noise of the sensor section.
    `parameter_sigma` is the per-step random-walk standard deviation of the
    estimated parameters: absolute by default (Q_p = 1e-6 I), or relative to
    the initial guess with `parameter_walk: relative`. `initial_error` offsets
    the starting guess from the configured values, for identification runs
    on simulated logs whose truth is known.
    """
    model: Literal['single', 'double', 'full'] = 'single'
    adaptive: bool = True
    parameters: Tuple[str, ...] = ('D', 'm', 'I_z')
    initial_error: float = 0.0
    measured: Tuple[str, ...] = STATE3_FIELDS
    process_sigma: float = 0.01
    observation_sigma: Optional[float] = None
    parameter_sigma: float = 1e-3
    parameter_walk: Literal['absolute', 'relative'] = 'absolute'
    window_seconds: float = 10.0
    substeps: int = 10
    alpha: float = 0.1
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.parameter_sigma < 0:
            raise ConfigError(f'parameter_sigma must be nonnegative, got {self.parameter_sigma}')

    def parameter_walk_sigma(self, initial: np.ndarray) -> np.ndarray:
        "Per-step random-walk standard deviation of parameters starting at `initial`"
        initial = np.asarray(initial, dtype=float)
        if self.parameter_walk == 'relative':
            return self.parameter_sigma * np.abs(initial)
        return np.full(initial.shape, self.parameter_sigma)


@dataclass(frozen=True)
class MoiAxis:
    m: float
    R_1: float
    R_2: float
    d: float
    g: float = 9.81


@dataclass(frozen=True)
class MoiSection:
    sample_rate: float = 100.0
    n_periods: int = 60
    lowpass: bool = True
    axes: Dict[str, MoiAxis] = field(default_factory=lambda: {
        'front_wheel': MoiAxis(m=1.64, R_1=0.182, R_2=0.182, d=0.935),
        'rear_wheel': MoiAxis(m=1.78, R_1=0.182, R_2=0.182, d=0.915),
    })


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. `seed` is required; the run length is `duration` (s)."""
    seed: int
    model: Literal['single', 'double', 'full'] = 'single'
    driver: Literal['excitation', 'mppi', 'zero'] = 'excitation'
    duration: float = 60.0
    output: str = 'runs'
    vehicle: VehicleSection = field(default_factory=VehicleSection)
    tire: TireSection = field(default_factory=TireSection)
    track: TrackSection = field(default_factory=TrackSection)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    controller: MppiParams = field(default_factory=MppiParams)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    chassis: CalibrationTable = field(default_factory=CalibrationTable)
    simulation: ClosedLoopConfig = field(default_factory=ClosedLoopConfig)
    excitation: ExcitationSection = field(default_factory=ExcitationSection)
    moi: MoiSection = field(default_factory=MoiSection)

    def closed_loop(self) -> ClosedLoopConfig:
        return replace(self.simulation, duration=self.duration)


# keys owned by another section
_EXCLUDED = {('simulation',): {'duration'}}


class _Context(NamedTuple):
    source: str
    lines: Dict[Tuple, int]

    def error(self, path: Tuple, message: str) -> ConfigError:
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        where = '.'.join(str(p) for p in path) or '<root>'
        return ConfigError(f'{self.source}:{line if line is not None else "?"}: {where}: {message}')


def _node_lines(node: yaml.Node, path: Tuple = (), out: Dict[Tuple, int] = None) -> Dict[Tuple, int]:
    "1-based source line of every key and sequence item, keyed by its path"
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            child = path + (key.value,)
            out[child] = key.start_mark.line + 1
            _node_lines(value, child, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            out[path + (i,)] = item.start_mark.line + 1
            _node_lines(item, path + (i,), out)
    return out


def _coerce(value: Any, tp: Any, path: Tuple, ctx: _Context) -> Any:
    if is_dataclass(tp):
        return _build(tp, value, path, ctx)
    origin, args = get_origin(tp), get_args(tp)
    if tp is Any:
        return value
    if origin is Union:
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, path, ctx)
    if origin is Literal:
        if value not in args:
            raise ctx.error(path, f'expected one of {list(args)}, got {value!r}')
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ctx.error(path, f'expected a boolean, got {value!r}')
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ctx.error(path, f'expected an integer, got {value!r}')
        return value
    if tp is float:
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-4) as strings
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ctx.error(path, f'expected a number, got {value!r}')
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ctx.error(path, f'expected a string, got {value!r}')
        return value
    if origin is tuple:
        if not isinstance(value, list):
            raise ctx.error(path, f'expected a list, got {value!r}')
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], path + (i,), ctx) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ctx.error(path, f'expected a list of length {len(args)}, got {len(value)}')
        return tuple(_coerce(v, a, path + (i,), ctx) for i, (v, a) in enumerate(zip(value, args)))
    if origin in (dict, Mapping):
        if not isinstance(value, dict):
            raise ctx.error(path, f'expected a mapping, got {value!r}')
        return {str(k): _coerce(v, args[1], path + (k,), ctx) for k, v in value.items()}
    raise ctx.error(path, f'unsupported field type {tp}')


def _build(cls: type, data: Any, path: Tuple, ctx: _Context) -> Any:
    if not isinstance(data, dict):
        raise ctx.error(path, f'expected a mapping for {cls.__name__}, got {data!r}')
    hints = get_type_hints(cls)
    allowed = {f.name for f in fields(cls) if f.init} - _EXCLUDED.get(path, set())
    for key in data:
        if key not in allowed:
            raise ctx.error(path + (key,), f'unknown key {key!r}, expected one of {sorted(allowed)}')
    kwargs = {name: _coerce(value, hints[name], path + (name,), ctx) for name, value in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ctx.error(path, str(e)) from None
    except ValueError as e:
        raise ctx.error(path, str(e)) from None


def parse_config(text: str, source: str = '<string>') -> ExperimentConfig:
    """Parse and validate a YAML experiment config.

    Unknown keys, wrong types and invalid values raise ConfigError with a
    `source:line:` prefix pointing at the offending key.
    """
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ConfigError(f'{source}:{mark.line + 1 if mark else "?"}: invalid YAML: {getattr(e, "problem", e)}') from None
    ctx = _Context(source, _node_lines(node) if node is not None else {})
    if data is None:
        data = {}
    if isinstance(data, dict) and 'seed' not in data:
        raise ctx.error((), 'missing required key seed')
    cfg = _build(ExperimentConfig, data, (), ctx)
    if cfg.estimator.model == 'full' and cfg.model != 'full':
        raise ctx.error(('estimator', 'model'), 'the full estimator model needs full-model logs')
    logger.debug(f'loaded config {source} (hash {config_hash(cfg)[:12]})')
    return cfg


def load_config(file: Union[str, Path]) -> ExperimentConfig:
    "Read an experiment config from a YAML file"
    with open(file, 'r', encoding='utf-8') as fp:
        text = fp.read()
    return parse_config(text, source=str(file))


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _resolved(cfg: ExperimentConfig) -> Dict[str, Any]:
    data = _plain(asdict(cfg))
    for path, keys in _EXCLUDED.items():
        section = data
        for key in path:
            section = section[key]
        for key in keys:
            section.pop(key, None)
    return data


def dump_config(cfg: ExperimentConfig) -> str:
    "Fully resolved config as YAML, keys sorted; `parse_config` reads it back unchanged"
    return yaml.safe_dump(_resolved(cfg), sort_keys=True, default_flow_style=None)


def config_hash(cfg: ExperimentConfig) -> str:
    "SHA-256 of the canonical JSON of the parsed config"
    canonical = json.dumps(_resolved(cfg), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
