import logging
from dataclasses import dataclass, field
from typing import *

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ._helpers import ConfigError, DivergenceError, InsufficientDataError
from .chassis import CHANNELS, ChassisArbiter, ChassisCommand, CalibrationTable, PriorityTable, commands_to_controls
from .mppi import MppiController, mpc_step
from .tire import MagicFormulaParams
from .track import CostMap, ReferenceTrajectory, TrackMap, signed_distance
from .vehicle import CONTROL_FIELDS, STATE3_FIELDS, STATE11_FIELDS, VehicleParams, full_vehicle_derivatives, integrate_rk4


__all__ = [
    'SensorConfig',
    'ClosedLoopConfig',
    'SensorStream',
    'TruthTrajectory',
    'LapRecord',
    'SimulationLog',
    'simulate_sensors',
    'reference_truth',
    'zero_driver',
    'excitation_driver',
    'mppi_driver',
    'initial_state',
    'run_closed_loop',
]

logger = logging.getLogger(__name__)

GRAVITY = 9.81

_ODOM_CATEGORY = {
    'V_x': 'velocity', 'V_y': 'velocity', 'V_z_s': 'velocity',
    'r': 'rate', 'theta_dot': 'rate', 'phi_dot': 'rate',
    'psi': 'angle', 'theta': 'angle', 'phi': 'angle',
    'p_x': 'position', 'p_y': 'position', 'z_s': 'position',
    'omega_f': 'wheel', 'omega_r': 'wheel',
}


@dataclass(frozen=True)
class SensorConfig:
    """Rates (Hz) and noise levels of the simulated sensors.

    IMU white noise is given per sample, bias random walks per sqrt(s).
    `wheel_magnets` is the number of magnets per wheel revolution counted by
    the Hall sensors; 0 reports the exact wheel speed.
    """
    gps_rate: float = 20.0
    gps_sigma: float = 0.02
    gps_time_jitter: float = 0.0
    imu_rate: float = 200.0
    accel_sigma: float = 0.05
    gyro_sigma: float = 0.005
    accel_bias_walk: float = 1e-3
    gyro_bias_walk: float = 1e-4
    wheel_rate: float = 70.0
    wheel_sigma: float = 0.0
    wheel_magnets: int = 8
    odom_rate: float = 100.0
    odom_sigma_velocity: float = 0.02
    odom_sigma_rate: float = 0.01
    odom_sigma_angle: float = 0.005
    odom_sigma_position: float = 0.02
    odom_sigma_wheel: float = 0.05

    def __post_init__(self):
        for name in ('gps_rate', 'imu_rate', 'wheel_rate', 'odom_rate'):
            if not getattr(self, name) > 0:
                raise ConfigError(f'sensor rate {name} must be positive, got {getattr(self, name)}')
        for name in ('gps_sigma', 'gps_time_jitter', 'accel_sigma', 'gyro_sigma', 'accel_bias_walk', 'gyro_bias_walk',
                     'wheel_sigma', 'odom_sigma_velocity', 'odom_sigma_rate', 'odom_sigma_angle', 'odom_sigma_position', 'odom_sigma_wheel'):
            if getattr(self, name) < 0:
                raise ConfigError(f'sensor noise {name} must be nonnegative, got {getattr(self, name)}')
        if self.gps_time_jitter >= 0.5 / self.gps_rate:
            raise ConfigError(f'gps_time_jitter {self.gps_time_jitter} would reorder fixes at {self.gps_rate} Hz')
        if self.wheel_magnets < 0:
            raise ConfigError(f'wheel_magnets must be nonnegative, got {self.wheel_magnets}')

    @classmethod
    def noiseless(cls, **rates) -> 'SensorConfig':
        return cls(
            gps_sigma=0.0, accel_sigma=0.0, gyro_sigma=0.0, accel_bias_walk=0.0, gyro_bias_walk=0.0,
            wheel_magnets=0, odom_sigma_velocity=0.0, odom_sigma_rate=0.0, odom_sigma_angle=0.0,
            odom_sigma_position=0.0, odom_sigma_wheel=0.0, **rates,
        )

    def odom_sigmas(self, fields: Sequence[str]) -> np.ndarray:
        return np.array([getattr(self, f'odom_sigma_{_ODOM_CATEGORY[name]}') for name in fields])


class SensorStream(NamedTuple):
    name: str
    t: np.ndarray           # [N] timestamps (s), nondecreasing
    values: np.ndarray      # [N, d]
    fields: Tuple[str, ...]


class TruthTrajectory(NamedTuple):
    t: np.ndarray           # [N]
    states: np.ndarray      # [N, n]
    controls: np.ndarray    # [N, 3] control applied from t[i] on
    fields: Tuple[str, ...]


def _sample_times(t0: float, t1: float, rate: float) -> np.ndarray:
    k = np.arange(np.ceil(t0 * rate - 1e-9), np.floor(t1 * rate + 1e-9) + 1)
    return k / rate


def _interp_columns(t_query: np.ndarray, t: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(t_query, t, values[:, i]) for i in range(values.shape[1])], axis=-1)


def simulate_sensors(truth: TruthTrajectory, cfg: SensorConfig = SensorConfig(), seed: int = 0) -> Dict[str, SensorStream]:
    """Noisy sensor streams sampled from a truth trajectory.

    The IMU frame is the yaw-aligned body frame on a flat surface: specific
    force (a_x, a_y, g) and angular rate (0, 0, r). Each stream draws from
    its own child of `SeedSequence(seed)`.

    Args:
        truth (TruthTrajectory): states sampled at 200 Hz or faster
        cfg (SensorConfig): rates and noise levels
        seed (int): random seed

    Returns:
        Dict[str, SensorStream]: streams 'gps', 'imu', 'wheels', 'odom' and 'control'
    """
    t, states = np.asarray(truth.t, dtype=float), np.asarray(truth.states, dtype=float)
    if len(t) < 2:
        raise InsufficientDataError('truth trajectory needs at least two samples')
    if np.max(np.diff(t)) > 1 / 200 + 1e-9:
        raise InsufficientDataError(f'truth must be sampled at 200 Hz or faster, got steps up to {np.max(np.diff(t)):.4f} s')
    rng_gps, rng_imu, rng_wheel, rng_odom = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))
    t0, t1 = t[0], t[-1]
    streams = {}

    t_gps = _sample_times(t0, t1, cfg.gps_rate)
    position = np.concatenate([_interp_columns(t_gps, t, states[:, 4:6]), np.zeros((len(t_gps), 1))], axis=-1)
    position = position + rng_gps.normal(0.0, 1.0, position.shape) * cfg.gps_sigma
    stamps = t_gps + rng_gps.uniform(-1.0, 1.0, len(t_gps)) * cfg.gps_time_jitter
    streams['gps'] = SensorStream('gps', stamps, position, ('x', 'y', 'z'))

    t_imu = _sample_times(t0, t1, cfg.imu_rate)
    V_x, V_y, r = states[:, 0], states[:, 1], states[:, 2]
    specific = np.stack([
        np.gradient(V_x, t) - V_y * r,
        np.gradient(V_y, t) + V_x * r,
        np.full_like(V_x, GRAVITY),
    ], axis=-1)
    rate = np.stack([np.zeros_like(r), np.zeros_like(r), r], axis=-1)
    imu = _interp_columns(t_imu, t, np.concatenate([specific, rate], axis=-1))
    dt_imu = 1 / cfg.imu_rate
    walk = np.concatenate([
        np.full(3, cfg.accel_bias_walk), np.full(3, cfg.gyro_bias_walk)
    ]) * np.sqrt(dt_imu)
    white = np.concatenate([np.full(3, cfg.accel_sigma), np.full(3, cfg.gyro_sigma)])
    bias = np.cumsum(rng_imu.normal(0.0, 1.0, imu.shape) * walk, axis=0)
    imu = imu + bias + rng_imu.normal(0.0, 1.0, imu.shape) * white
    streams['imu'] = SensorStream('imu', t_imu, imu, ('a_x', 'a_y', 'a_z', 'w_x', 'w_y', 'w_z'))

    t_wheel = _sample_times(t0, t1, cfg.wheel_rate)
    omega = states[:, 6:8]
    if cfg.wheel_magnets > 0:
        angle = cumulative_trapezoid(omega, t, axis=0, initial=0)
        period = 1 / cfg.wheel_rate
        counts_now = np.floor(_interp_columns(t_wheel, t, angle) * cfg.wheel_magnets / (2 * np.pi))
        counts_before = np.floor(_interp_columns(np.maximum(t_wheel - period, t0), t, angle) * cfg.wheel_magnets / (2 * np.pi))
        wheels = (counts_now - counts_before) * 2 * np.pi / cfg.wheel_magnets / period
    else:
        wheels = _interp_columns(t_wheel, t, omega)
    wheels = wheels + rng_wheel.normal(0.0, 1.0, wheels.shape) * cfg.wheel_sigma
    streams['wheels'] = SensorStream('wheels', t_wheel, wheels, ('omega_f', 'omega_r'))

    t_odom = _sample_times(t0, t1, cfg.odom_rate)
    odom = _interp_columns(t_odom, t, states)
    odom = odom + rng_odom.normal(0.0, 1.0, odom.shape) * cfg.odom_sigmas(truth.fields)
    streams['odom'] = SensorStream('odom', t_odom, odom, tuple(truth.fields))

    held = np.clip(np.searchsorted(t, t_odom + 1e-9, side='right') - 1, 0, len(t) - 1)
    streams['control'] = SensorStream('control', t_odom, np.asarray(truth.controls, dtype=float)[held], CONTROL_FIELDS)
    return streams


def reference_truth(ref: ReferenceTrajectory, vehicle: VehicleParams = VehicleParams()) -> TruthTrajectory:
    "Single-track truth states of a no-slip drive along a reference trajectory, with zero controls"
    speed = np.linalg.norm(ref.velocity, axis=-1)
    states = np.zeros((len(ref.t), len(STATE3_FIELDS)))
    states[:, 0] = speed
    states[:, 2] = ref.yaw_rate
    states[:, 3] = np.unwrap(ref.heading)
    states[:, 4:6] = ref.position
    states[:, 6] = states[:, 7] = speed / vehicle.R
    return TruthTrajectory(ref.t, states, np.zeros((len(ref.t), 3)), STATE3_FIELDS)


Driver = Callable[[float, np.ndarray], Tuple[float, float]]


def zero_driver(t: float, state: np.ndarray) -> Tuple[float, float]:
    return 0.0, 0.0


def excitation_driver(track: TrackMap, vehicle: VehicleParams = VehicleParams(), speed: float = 3.0, amplitude: float = 0.3, period: float = 2.0, lookahead: float = 2.0, gain: float = 0.5) -> Driver:
    """Centerline-following driver with sinusoidal steering and throttle excitation.

    Pure pursuit on the centerline keeps the vehicle on the track while the
    added sinusoids exercise the lateral and longitudinal tire response.
    """
    def driver(t: float, state: np.ndarray) -> Tuple[float, float]:
        p = state[4:6]
        target, _ = track.centerline_point(track.progress(p) + lookahead)
        alpha = np.arctan2(target[1] - p[1], target[0] - p[0]) - state[3]
        delta = np.arctan2(2 * vehicle.wheelbase * np.sin(alpha), lookahead)
        steering = -delta / vehicle.delta_max + amplitude * np.sin(2 * np.pi * t / period)
        throttle = gain * (speed - state[0]) + 0.15 * np.sin(2 * np.pi * t / (1.3 * period))
        return float(np.clip(steering, -1, 1)), float(np.clip(throttle, -1, 1))

    return driver


def mppi_driver(controller: MppiController) -> Driver:
    def driver(t: float, state: np.ndarray) -> Tuple[float, float]:
        u0, _ = mpc_step(controller, state)
        return float(u0[0]), float(u0[1])

    return driver


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Closed-loop run settings.

    human_windows holds (t_start, t_end, steering, throttle) commands of the
    scripted high-priority sender; runstop_schedule holds (t, source,
    motion_enabled) events.
    """
    duration: float = 60.0
    physics_rate: float = 1000.0
    control_rate: float = 40.0
    feedback: Literal['truth', 'noisy'] = 'truth'
    process_noise: float = 0.0
    start_offset: float = 0.5
    initial_speed: float = 0.0
    sender_timeout: float = 0.2
    human_windows: Tuple[Tuple[float, float, float, float], ...] = ()
    runstop_sources: Tuple[str, ...] = ('remote', 'operator')
    runstop_schedule: Tuple[Tuple[float, str, bool], ...] = ((0.0, 'remote', True),)
    terminate_on_boundary: bool = True

    def __post_init__(self):
        if not self.duration >= 0:
            raise ConfigError(f'duration must be nonnegative, got {self.duration}')
        ratio = self.physics_rate / self.control_rate
        if not self.control_rate > 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(f'physics rate {self.physics_rate} must be a multiple of the control rate {self.control_rate}')
        if 1 / self.physics_rate > 0.05:
            raise ConfigError('physics step must not exceed 0.05 s')
        if self.feedback not in ('truth', 'noisy'):
            raise ConfigError(f'feedback must be truth or noisy, got {self.feedback!r}')


@dataclass
class LapRecord:
    lap: int
    t_start: float
    t_end: float
    lap_time: float
    off_track: int


@dataclass
class SimulationLog:
    t: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    fields: Tuple[str, ...]
    commands: List[Dict[str, Any]] = field(default_factory=list)
    laps: List[LapRecord] = field(default_factory=list)
    status: Literal['completed', 'boundary_violation', 'diverged'] = 'completed'
    boundary_violations: int = 0
    off_track: int = 0

    def truth(self) -> TruthTrajectory:
        return TruthTrajectory(self.t, self.states, self.controls, self.fields)


def initial_state(track: TrackMap, vehicle: VehicleParams, full: bool = False, start_offset: float = 0.5, speed: float = 0.0) -> np.ndarray:
    "Vehicle on the centerline `start_offset` meters past the start line, aligned with it"
    position, heading = track.centerline_point(start_offset)
    state = np.zeros(len(STATE11_FIELDS) if full else len(STATE3_FIELDS))
    state[0] = speed
    state[3] = heading
    state[4:6] = position
    state[6:8] = speed / vehicle.R
    return state


def run_closed_loop(
    model: Callable[..., np.ndarray],
    driver: Driver,
    track: TrackMap,
    costmap: CostMap,
    cfg: ClosedLoopConfig = ClosedLoopConfig(),
    vehicle: VehicleParams = VehicleParams(),
    mf: MagicFormulaParams = MagicFormulaParams(),
    seed: int = 0,
    sensors: SensorConfig = SensorConfig(),
    calibration: CalibrationTable = CalibrationTable(),
) -> SimulationLog:
    """Fixed-step closed loop: physics at `physics_rate`, driver at `control_rate`.

    The driver's command and the scripted human sender go through chassis
    arbitration and the runstop before actuation. A lap is counted at every
    forward crossing of the start line. The run stops early, with the reason
    recorded in `status`, when the vehicle leaves the cost-map grid or the
    integration diverges.

    Args:
        model (Callable): vehicle derivative function
        driver (Driver): (t, feedback state) -> (steering, throttle)
        track (TrackMap): the track
        costmap (CostMap): its cost map, whose grid bounds the run
        cfg (ClosedLoopConfig): loop settings
        vehicle (VehicleParams): vehicle parameters (`FullVehicleParams` for the full model)
        mf (MagicFormulaParams): tire parameters
        seed (int): seed of the process and feedback noise
        sensors (SensorConfig): feedback noise levels for `feedback='noisy'`
        calibration (CalibrationTable): actuator pulse widths

    Returns:
        SimulationLog
    """
    full = model is full_vehicle_derivatives
    fields = STATE11_FIELDS if full else STATE3_FIELDS
    rng_process, rng_feedback = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    feedback_sigma = sensors.odom_sigmas(fields)
    dt = 1 / cfg.physics_rate
    ratio = int(round(cfg.physics_rate / cfg.control_rate))
    n_steps = int(round(cfg.duration * cfg.physics_rate))

    arbiter = ChassisArbiter(
        PriorityTable(('human', 'auto'), default_timeout=cfg.sender_timeout),
        cfg.runstop_sources, calibration,
    )
    schedule = sorted(cfg.runstop_schedule, key=lambda event: event[0])
    next_event = 0

    s = initial_state(track, vehicle, full, cfg.start_offset, cfg.initial_speed)
    u = np.zeros(3)
    times, states, controls = [0.0], [s], []
    log = SimulationLog(np.zeros(0), np.zeros((0, len(fields))), np.zeros((0, 3)), fields)
    L = track.length
    progress = float(track.progress(s[4:6]))
    lap_start, lap_off_track = 0.0, 0
    was_off = bool(signed_distance(track, s[4:6]) > 0)

    logger.info(f'closed loop: {cfg.duration} s at {cfg.physics_rate:g} Hz, control at {cfg.control_rate:g} Hz, seed {seed}')
    for i in range(n_steps):
        t = i * dt
        if i % ratio == 0:
            while next_event < len(schedule) and schedule[next_event][0] <= t + 1e-12:
                _, source, enabled = schedule[next_event]
                arbiter.update_runstop(source, enabled)
                next_event += 1
            feedback = s if cfg.feedback == 'truth' else s + rng_feedback.normal(0.0, 1.0, s.shape) * feedback_sigma
            steering, throttle = driver(t, feedback)
            arbiter.submit(ChassisCommand('auto', float(np.clip(steering, -1, 1)), float(np.clip(throttle, -1, 1)), 0.0, stamp=t))
            for t_start, t_end, human_steering, human_throttle in cfg.human_windows:
                if t_start <= t < t_end:
                    arbiter.submit(ChassisCommand('human', human_steering, human_throttle, stamp=t))
            chassis = arbiter.snapshot(t)
            u = commands_to_controls(np.array([chassis.values[channel] for channel in CHANNELS]), vehicle)
            log.commands.append({
                't': t,
                **{channel: chassis.values[channel] for channel in CHANNELS},
                **{f'{channel}_us': chassis.pulses[channel] for channel in CHANNELS},
                **{f'{channel}_sender': chassis.winners[channel] or '' for channel in CHANNELS},
                'motion_enabled': chassis.motion_enabled,
            })
        controls.append(u)

        try:
            s = integrate_rk4(model, s, u, dt, vehicle, mf)
        except DivergenceError as e:
            logger.error(f'{t + dt:.3f} s: simulation diverged: {e}')
            log.status = 'diverged'
            break
        if cfg.process_noise > 0:
            s = s.copy()
            s[:3] += rng_process.normal(0.0, cfg.process_noise * np.sqrt(dt), 3)
        times.append((i + 1) * dt)
        states.append(s)

        if not costmap.contains(s[4:6]):
            log.boundary_violations += 1
            logger.warning(f'{(i + 1) * dt:.3f} s: vehicle left the cost map at ({s[4]:.2f}, {s[5]:.2f})')
            if cfg.terminate_on_boundary:
                log.status = 'boundary_violation'
                break

        off = bool(signed_distance(track, s[4:6]) > 0)
        if off and not was_off:
            lap_off_track += 1
            log.off_track += 1
        was_off = off
        new_progress = float(track.progress(s[4:6]))
        if progress > 0.75 * L and new_progress < 0.25 * L:
            t_end = (i + 1) * dt
            log.laps.append(LapRecord(len(log.laps) + 1, lap_start, t_end, t_end - lap_start, lap_off_track))
            logger.info(f'lap {len(log.laps)}: {t_end - lap_start:.2f} s, {lap_off_track} off-track excursions')
            lap_start, lap_off_track = t_end, 0
        progress = new_progress

    controls.append(u)
    log.t = np.array(times)
    log.states = np.stack(states)
    log.controls = np.stack(controls[:len(times)])
    logger.info(f'closed loop finished ({log.status}): {len(log.laps)} laps, {log.boundary_violations} boundary violations')
    return log
