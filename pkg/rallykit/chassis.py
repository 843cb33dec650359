import logging
from dataclasses import dataclass, field
from typing import *

import numpy as np

from ._helpers import ConfigError, DomainError
from .vehicle import VehicleParams, ControlInput


__all__ = [
    'CHANNELS',
    'CHANNEL_RANGES',
    'ActuatorCalibration',
    'CalibrationTable',
    'ChassisCommand',
    'PriorityTable',
    'ArbitrationResult',
    'ChassisState',
    'ChassisArbiter',
    'calibrate',
    'arbitrate',
    'runstop_enabled',
    'commands_to_controls',
    'command_to_input',
]

logger = logging.getLogger(__name__)

CHANNELS = ('steering', 'throttle', 'front_brake')
CHANNEL_RANGES = {'steering': (-1.0, 1.0), 'throttle': (-1.0, 1.0), 'front_brake': (0.0, 1.0)}
NEUTRAL = {'steering': 0.0, 'throttle': 0.0, 'front_brake': 0.0}


@dataclass(frozen=True)
class ActuatorCalibration:
    "Servo pulse widths (microseconds) at the normalized values -1, 0 and 1"
    min_us: float = 1000.0
    center_us: float = 1500.0
    max_us: float = 2000.0

    def __post_init__(self):
        if not self.min_us < self.center_us < self.max_us:
            raise ConfigError(f'calibration must satisfy min < center < max, got {self.min_us}/{self.center_us}/{self.max_us}')


@dataclass(frozen=True)
class CalibrationTable:
    steering: ActuatorCalibration = ActuatorCalibration()
    throttle: ActuatorCalibration = ActuatorCalibration()
    front_brake: ActuatorCalibration = ActuatorCalibration()

    def pulses(self, values: Mapping[str, float]) -> Dict[str, float]:
        return {channel: calibrate(values[channel], getattr(self, channel), channel) for channel in CHANNELS}


def calibrate(value: float, cal: ActuatorCalibration = ActuatorCalibration(), channel: str = 'steering') -> float:
    """Pulse width for a normalized actuator value.

    [-1, 0] maps linearly onto [min_us, center_us] and [0, 1] onto
    [center_us, max_us]. Values outside the channel's legal range are clamped
    with a warning.

    Args:
        value (float): normalized command
        cal (ActuatorCalibration): pulse widths of the actuator
        channel (str): one of `CHANNELS`, selects the legal range

    Returns:
        float: pulse width (microseconds)
    """
    low, high = CHANNEL_RANGES[channel]
    value = float(value)
    if not low <= value <= high:
        logger.warning(f'{channel} command {value} outside [{low}, {high}], clamped')
        value = min(max(value, low), high)
    if value < 0:
        return cal.center_us + value * (cal.center_us - cal.min_us)
    return cal.center_us + value * (cal.max_us - cal.center_us)


@dataclass(frozen=True)
class ChassisCommand:
    """Normalized actuator request of one sender. A channel set to None is not commanded."""
    sender: str
    steering: Optional[float] = None
    throttle: Optional[float] = None
    front_brake: Optional[float] = None
    stamp: float = 0.0

    def __post_init__(self):
        for channel in CHANNELS:
            value = getattr(self, channel)
            low, high = CHANNEL_RANGES[channel]
            if value is not None and not low <= value <= high:
                raise DomainError(f'{channel} value {value} of sender {self.sender!r} outside [{low}, {high}]')

    @property
    def valid(self) -> Tuple[bool, bool, bool]:
        return tuple(getattr(self, channel) is not None for channel in CHANNELS)


@dataclass(frozen=True)
class PriorityTable:
    "Sender ids, highest priority first, with per-sender staleness timeouts (s)"
    senders: Tuple[str, ...]
    timeouts: Mapping[str, float] = field(default_factory=dict)
    default_timeout: float = 0.2

    def __post_init__(self):
        if not self.senders:
            raise ConfigError('priority table must list at least one sender')
        if len(set(self.senders)) != len(self.senders):
            raise ConfigError(f'duplicate sender ids in priority table {self.senders}')

    def timeout(self, sender: str) -> float:
        return self.timeouts.get(sender, self.default_timeout)


class ArbitrationResult(NamedTuple):
    values: Dict[str, float]
    winners: Dict[str, Optional[str]]
    degraded: Tuple[str, ...]


def arbitrate(commands: Iterable[ChassisCommand], table: PriorityTable, now: float) -> ArbitrationResult:
    """Per-channel priority arbitration.

    For each channel independently, the highest-priority sender whose latest
    command is fresh (age <= its timeout) and sets that channel wins. A
    channel without such a sender outputs its neutral value and is reported
    degraded. Senders missing from the table are ignored.

    Args:
        commands (Iterable[ChassisCommand]): latest command per sender
        table (PriorityTable): sender priorities and timeouts
        now (float): current time (s)

    Returns:
        ArbitrationResult: winning values, winner ids, degraded channels
    """
    latest = {}
    for command in commands:
        if command.sender in table.senders and (command.sender not in latest or command.stamp >= latest[command.sender].stamp):
            latest[command.sender] = command
    fresh = [
        latest[sender] for sender in table.senders
        if sender in latest and now - latest[sender].stamp <= table.timeout(sender)
    ]
    values, winners, degraded = {}, {}, []
    for channel in CHANNELS:
        winner = next((command for command in fresh if getattr(command, channel) is not None), None)
        if winner is None:
            values[channel], winners[channel] = NEUTRAL[channel], None
            degraded.append(channel)
        else:
            values[channel], winners[channel] = getattr(winner, channel), winner.sender
    return ArbitrationResult(values, winners, tuple(degraded))


def runstop_enabled(latest: Mapping[str, Optional[bool]], sources: Sequence[str] = None) -> bool:
    """Motion enable: OR of the most recent flag of every registered source.

    A registered source without a message yet contributes False.

    Args:
        latest (Mapping[str, Optional[bool]]): most recent motion-enabled flag per source
        sources (Sequence[str], optional): registered sources, defaults to the keys of `latest`
    """
    sources = list(latest) if sources is None else list(sources)
    assert len(sources) > 0, 'at least one runstop source must be registered'
    return any(bool(latest.get(source) or False) for source in sources)


def commands_to_controls(commands: np.ndarray, params: VehicleParams) -> np.ndarray:
    """Map normalized [..., 2] (steering, throttle) or [..., 3] (+ front_brake) commands to model controls.

    Steering +1 is full right, so delta = -steering * delta_max. Throttle >= 0
    is drive torque throttle * drive_torque_max; throttle < 0 is a rear brake
    of magnitude |throttle| * brake_torque_max, passed as a negative drive.

    Returns:
        np.ndarray: [..., 3] (delta, drive, brake_front)
    """
    commands = np.asarray(commands, dtype=float)
    steering, throttle = commands[..., 0], commands[..., 1]
    front_brake = commands[..., 2] if commands.shape[-1] > 2 else np.zeros_like(steering)
    drive = np.where(throttle >= 0, throttle * params.drive_torque_max, throttle * params.brake_torque_max)
    if params.drive_mode == 'force':
        drive = drive / params.R
    return np.stack([-steering * params.delta_max, drive, front_brake], axis=-1)


def command_to_input(steering: float, throttle: float, front_brake: float, params: VehicleParams) -> ControlInput:
    delta, drive, brake = commands_to_controls(np.array([steering, throttle, front_brake]), params)
    return ControlInput(float(delta), float(drive), float(brake))


class ChassisState(NamedTuple):
    stamp: float
    values: Dict[str, float]
    winners: Dict[str, Optional[str]]
    degraded: Tuple[str, ...]
    motion_enabled: bool
    pulses: Dict[str, float]


class ChassisArbiter:
    """Chassis interface state: latest command per sender and latest runstop flag per source.

    Written by one caller; `snapshot` returns an immutable view for loggers.
    """
    def __init__(self, table: PriorityTable, runstop_sources: Sequence[str], calibration: CalibrationTable = CalibrationTable()):
        assert len(runstop_sources) > 0, 'at least one runstop source must be registered'
        self.table = table
        self.calibration = calibration
        self.runstop_sources = tuple(runstop_sources)
        self.commands: Dict[str, ChassisCommand] = {}
        self.runstop: Dict[str, Optional[bool]] = {source: None for source in self.runstop_sources}
        self._degraded: Tuple[str, ...] = ()

    def submit(self, command: ChassisCommand):
        self.commands[command.sender] = command

    def update_runstop(self, source: str, motion_enabled: bool):
        if source not in self.runstop:
            raise KeyError(f'unregistered runstop source {source!r}')
        self.runstop[source] = bool(motion_enabled)

    def snapshot(self, now: float) -> ChassisState:
        result = arbitrate(self.commands.values(), self.table, now)
        if result.degraded != self._degraded:
            if result.degraded:
                logger.warning(f'{now:.3f} s: no valid sender for {", ".join(result.degraded)}, holding neutral')
            self._degraded = result.degraded
        enabled = runstop_enabled(self.runstop, self.runstop_sources)
        values = result.values if enabled else dict(result.values, throttle=NEUTRAL['throttle'])
        return ChassisState(
            stamp=now,
            values=values,
            winners=result.winners,
            degraded=result.degraded,
            motion_enabled=enabled,
            pulses=self.calibration.pulses(values),
        )
