import argparse
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path
from typing import *

import numpy as np

from ._helpers import ConfigError, DomainError, GeometryError, InsufficientDataError, NumericalError
from .bifilar import BifilarSetup, bifilar_moi, oscillation_period
from .io.config import ExperimentConfig, config_hash, dump_config, load_config
from .io.logs import read_array_table, read_sensor_log, read_table, write_array_table, write_sensor_log, write_table
from .io.manifest import RunManifest, file_sha256, write_manifest
from .mppi import MppiController
from .sim import SensorStream, excitation_driver, mppi_driver, run_closed_loop, simulate_sensors, zero_driver, SimulationLog
from .smoother import build_graph, interpolate_state, optimize
from .track import build_oval_track
from .ukf import UtParams, vehicle_joint_filter
from .vehicle import CONTROL_FIELDS, STATE3_FIELDS, STATE11_FIELDS, double_track_derivatives, full_vehicle_derivatives, single_track_derivatives
from .transforms import matrix_to_euler_angles, piecewise_lerp

__all__ = [
    'MODELS',
    'main',
    'build_parser',
]

logger = logging.getLogger(__name__)

MODELS = {
    'single': single_track_derivatives,
    'double': double_track_derivatives,
    'full': full_vehicle_derivatives,
}

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
TIME_COLUMNS = ('t_s', 't')
ANGLE_COLUMNS = ('angle_rad', 'angle')


def _components(cfg: ExperimentConfig):
    "(model, vehicle params, tire params, track, cost map)"
    model = MODELS[cfg.model]
    vehicle = cfg.vehicle.params(full=cfg.model == 'full')
    mf = cfg.tire.params()
    track, costmap = build_oval_track(**asdict(cfg.track))
    return model, vehicle, mf, track, costmap


def _output_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    out = Path(args.output) if args.output else Path(cfg.output) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Path, cfg: ExperimentConfig, command: str, seed: int, files: List[str], inputs: Sequence[Union[str, Path]] = ()):
    with open(out / 'config.yaml', 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(dump_config(cfg))
    manifest = RunManifest(
        command=command, config_hash=config_hash(cfg), seed=seed,
        inputs={Path(p).name: file_sha256(p) for p in inputs},
    )
    write_manifest(out, manifest, ['config.yaml', *files])
    logger.info(f'{command}: wrote {len(files) + 2} files to {out}')


def _write_run(out: Path, log: SimulationLog, decimate: int = 10) -> List[str]:
    "Trajectory, command and lap tables of a closed-loop run"
    write_sensor_log(out / 'trajectory.jsonl', {
        'state': SensorStream('state', log.t, log.states, tuple(log.fields)),
        'control': SensorStream('control', log.t, log.controls, CONTROL_FIELDS),
    })
    idx = np.arange(0, len(log.t), decimate)
    write_array_table(out / 'trajectory.csv', ('t', *log.fields, *CONTROL_FIELDS), np.concatenate([log.t[idx, None], log.states[idx], log.controls[idx]], axis=-1))
    write_table(out / 'commands.csv', log.commands)
    write_table(out / 'laps.csv', [asdict(lap) for lap in log.laps], ('lap', 't_start', 't_end', 'lap_time', 'off_track'))
    write_table(out / 'summary.csv', [{
        'status': log.status, 'laps': len(log.laps), 'boundary_violations': log.boundary_violations,
        'off_track': log.off_track, 'duration': float(log.t[-1]),
    }])
    return ['trajectory.jsonl', 'trajectory.csv', 'commands.csv', 'laps.csv', 'summary.csv']


def _closed_loop(cfg: ExperimentConfig, seed: int, driver_name: str) -> SimulationLog:
    model, vehicle, mf, track, costmap = _components(cfg)
    if driver_name == 'mppi':
        driver = mppi_driver(MppiController(cfg.controller, costmap, vehicle, mf, seed=seed))
    elif driver_name == 'excitation':
        driver = excitation_driver(track, vehicle, **asdict(cfg.excitation))
    else:
        driver = zero_driver
    return run_closed_loop(model, driver, track, costmap, cfg.closed_loop(), vehicle, mf, seed=seed, sensors=cfg.sensors, calibration=cfg.chassis)


def cmd_sim(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _output_dir(args, cfg)
    log = _closed_loop(cfg, cfg.seed, cfg.driver)
    truth = log.truth()
    streams = simulate_sensors(truth, cfg.sensors, seed=cfg.seed)
    step = max(int(round(cfg.simulation.physics_rate / cfg.sensors.imu_rate)), 1)
    streams['truth'] = SensorStream('truth', truth.t[::step], truth.states[::step], tuple(truth.fields))
    write_sensor_log(out / 'sensors.jsonl', streams)
    files = ['sensors.jsonl', *_write_run(out, log)]
    _finish(out, cfg, 'sim', cfg.seed, files)
    return EXIT_NUMERICAL if log.status == 'diverged' else EXIT_OK


def _race_one(cfg: ExperimentConfig, seed: int, out: str) -> Tuple[int, str, int]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    log = _closed_loop(cfg, seed, 'mppi')
    files = _write_run(out, log)
    _finish(out, cfg, 'race', seed, files)
    return seed, log.status, len(log.laps)


def cmd_race(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    out = _output_dir(args, cfg)
    if not args.seeds:
        _, status, _ = _race_one(cfg, cfg.seed, str(out))
        return EXIT_NUMERICAL if status == 'diverged' else EXIT_OK
    workers = min(len(args.seeds), args.jobs or os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_race_one, [cfg] * len(args.seeds), args.seeds, [str(out / f'seed_{seed}') for seed in args.seeds]))
    for seed, status, laps in results:
        logger.info(f'seed {seed}: {status}, {laps} laps')
    return EXIT_NUMERICAL if any(status == 'diverged' for _, status, _ in results) else EXIT_OK


def _require_input(args: argparse.Namespace, count: int = None) -> List[Path]:
    if not args.input:
        raise FileNotFoundError(f'{args.command} needs --input')
    paths = [Path(p) for p in args.input]
    for path in paths:
        if not path.exists():
            raise FileNotFoundError(f'input {path} does not exist')
    if count is not None and len(paths) != count:
        raise InsufficientDataError(f'{args.command} takes {count} input file(s), got {len(paths)}')
    return paths


def _column(header: Sequence[str], names: Sequence[str], default: int = None) -> Optional[int]:
    for name in names:
        if name in header:
            return header.index(name)
    return default


def _stream(streams: Dict[str, SensorStream], name: str, source: Path) -> SensorStream:
    if name not in streams or len(streams[name].t) == 0:
        raise InsufficientDataError(f'{source} has no {name} records')
    return streams[name]


def cmd_estimate(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    (source,) = _require_input(args, 1)
    est = cfg.estimator
    streams = read_sensor_log(source, ('odom', 'control'))
    odom, control = _stream(streams, 'odom', source), _stream(streams, 'control', source)
    state_fields = STATE11_FIELDS if est.model == 'full' else STATE3_FIELDS
    missing = [name for name in state_fields if name not in odom.fields]
    if missing:
        raise InsufficientDataError(f'odometry of {source} lacks {missing}')
    columns = [odom.fields.index(name) for name in state_fields]
    states = odom.values[:, columns]
    if len(odom.t) < 2:
        raise InsufficientDataError(f'{source} holds fewer than two odometry samples')
    rate = 1 / float(np.median(np.diff(odom.t)))

    vehicle = cfg.vehicle.params(full=est.model == 'full')
    mf = cfg.tire.params()
    vehicle_names = {f.name for f in fields(vehicle)}
    truth = np.array([getattr(vehicle if name in vehicle_names else mf, name) for name in est.parameters], dtype=float)
    initial = truth * (1 + est.initial_error)
    if est.observation_sigma is not None:
        observation_sigma = np.full(len(est.measured), est.observation_sigma)
    else:
        observation_sigma = np.maximum(cfg.sensors.odom_sigmas(est.measured), 1e-3)
    ukf = vehicle_joint_filter(
        MODELS[est.model], vehicle, mf, est.parameters, initial, states[0], state_fields, est.measured, rate,
        process_sigma=np.full(len(state_fields), est.process_sigma),
        observation_sigma=observation_sigma,
        parameter_sigma=est.parameter_walk_sigma(initial),
        substeps=est.substeps,
        ut=UtParams(est.alpha, est.beta, est.kappa),
        adaptive=est.adaptive,
        window_seconds=est.window_seconds,
    )
    measured_index = [state_fields.index(name) for name in est.measured]
    held = np.clip(np.searchsorted(control.t, odom.t + 1e-9, side='right') - 1, 0, len(control.t) - 1)
    controls = control.values[held]
    n = len(state_fields)
    rows = []
    logger.info(f'estimate: {len(odom.t) - 1} steps at {rate:.1f} Hz, parameters {list(est.parameters)}, adaptive={est.adaptive}')
    for k in range(1, len(odom.t)):
        belief = ukf.step(states[k, measured_index], controls[k - 1])
        rows.append(np.concatenate([[odom.t[k]], belief.mean, np.diag(ukf.stats.Q), np.diag(ukf.stats.R)]))

    out = _output_dir(args, cfg)
    header = ('t', *state_fields, *est.parameters, *(f'Q_{name}' for name in state_fields), *(f'R_{name}' for name in est.measured))
    write_array_table(out / 'estimate.csv', header, np.array(rows).reshape(len(rows), len(header)))
    estimate = ukf.parameters
    errors = np.abs(estimate - truth) / np.abs(truth)
    write_table(out / 'params.csv', [
        {'parameter': name, 'truth': float(t), 'initial': float(i), 'estimate': float(e), 'relative_error': float(r)}
        for name, t, i, e, r in zip(est.parameters, truth, initial, estimate, errors)
    ])
    for name, e, r in zip(est.parameters, estimate, errors):
        logger.info(f'{name}: {e:.5g} ({100 * r:.2f}% error)')
    if ukf.repairs:
        logger.warning(f'{ukf.repairs} noise estimates repaired to positive definite')
    _finish(out, cfg, 'estimate', cfg.seed, ['estimate.csv', 'params.csv'], [source])
    return EXIT_OK


def cmd_smooth(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    (source,) = _require_input(args, 1)
    streams = read_sensor_log(source, ('gps', 'imu', 'truth'))
    gps = _stream(streams, 'gps', source)
    imu = streams.get('imu') if cfg.smoother.use_imu else None
    graph, initial = build_graph(gps, imu, cfg.smoother)
    result = optimize(graph, initial)
    values = result.values

    out = _output_dir(args, cfg)
    map_header = ('t', 'p_x', 'p_y', 'p_z', 'v_x', 'v_y', 'v_z', 'roll', 'pitch', 'yaw', 'b_ax', 'b_ay', 'b_az', 'b_gx', 'b_gy', 'b_gz')
    map_rows = np.concatenate([
        graph.node_times[:, None], values.p + graph.origin, values.v, matrix_to_euler_angles(values.R), values.b,
    ], axis=-1)
    write_array_table(out / 'map.csv', map_header, map_rows)
    stream = interpolate_state(graph, values, imu)
    write_array_table(out / 'states.csv', ('t', 'p_x', 'p_y', 'p_z', 'v_x', 'v_y', 'v_z', 'roll', 'pitch', 'yaw'),
                      np.concatenate([stream.t[:, None], stream.position, stream.velocity, stream.euler], axis=-1))
    summary = {'nodes': graph.n_nodes, 'iterations': result.iterations, 'initial_cost': result.initial_cost, 'cost': result.cost, 'converged': result.converged}
    if 'truth' in streams and len(streams['truth'].t):
        truth = streams['truth']
        true_nodes = piecewise_lerp(truth.values[:, 4:6], truth.t, graph.node_times)
        true_fixes = piecewise_lerp(truth.values[:, 4:6], truth.t, gps.t)
        summary['rmse_map'] = float(np.sqrt(np.mean(np.sum((values.p[:, :2] + graph.origin[:2] - true_nodes) ** 2, axis=-1))))
        summary['rmse_gps'] = float(np.sqrt(np.mean(np.sum((gps.values[:, :2] - true_fixes) ** 2, axis=-1))))
        logger.info(f'smooth: position RMSE {summary["rmse_map"]:.4f} m vs raw GPS {summary["rmse_gps"]:.4f} m')
    write_table(out / 'smoother.csv', [summary])
    _finish(out, cfg, 'smooth', cfg.seed, ['map.csv', 'states.csv', 'smoother.csv'], [source])
    return EXIT_OK


def cmd_moi(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    sources = _require_input(args)
    rows = []
    for source in sources:
        axis = source.stem
        if axis not in cfg.moi.axes:
            raise ConfigError(f'no pendulum geometry for axis {axis!r} in moi.axes')
        header, table = read_array_table(source)
        angle = table[:, _column(header, ANGLE_COLUMNS, default=-1)]
        time = _column(header, TIME_COLUMNS)
        if time is not None and len(table) > 1:
            sample_rate = 1 / float(np.median(np.diff(table[:, time])))
        else:
            sample_rate = cfg.moi.sample_rate
        T = oscillation_period(angle, sample_rate, cfg.moi.n_periods, cfg.moi.lowpass)
        setup = BifilarSetup(**asdict(cfg.moi.axes[axis]))
        rows.append({'axis': axis, 'period': T, 'moi': bifilar_moi(setup, T)})
        logger.info(f'{axis}: T = {T:.4f} s, I = {rows[-1]["moi"]:.5f} kg m^2')
    out = _output_dir(args, cfg)
    write_table(out / 'moi.csv', rows, ('axis', 'period', 'moi'))
    _finish(out, cfg, 'moi', cfg.seed, ['moi.csv'], sources)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    runs = _require_input(args)
    laps, params, noise, trajectory = [], [], [], []
    for run in runs:
        name = run.name
        if (run / 'laps.csv').exists():
            laps.extend({'run': name, **row} for row in read_table(run / 'laps.csv'))
        if (run / 'trajectory.csv').exists():
            header, table = read_array_table(run / 'trajectory.csv')
            keep = [header.index(c) for c in ('t', 'p_x', 'p_y', 'V_x')]
            trajectory.extend({'run': name, **dict(zip(('t', 'p_x', 'p_y', 'V_x'), row))} for row in table[::args.decimate][:, keep].tolist())
        if (run / 'estimate.csv').exists():
            header, table = read_array_table(run / 'estimate.csv')
            table = table[::args.decimate]
            noise_cols = [i for i, h in enumerate(header) if h.startswith(('Q_', 'R_'))]
            param_cols = [i for i, h in enumerate(header) if i > 0 and i not in noise_cols and h not in STATE11_FIELDS]
            params.extend({'run': name, 't': row[0], **{header[i]: row[i] for i in param_cols}} for row in table.tolist())
            noise.extend({'run': name, 't': row[0], **{header[i]: row[i] for i in noise_cols}} for row in table.tolist())
    if not (laps or trajectory or params):
        raise InsufficientDataError(f'no run tables found in {[str(r) for r in runs]}')
    out = _output_dir(args, cfg)

    def union(rows):
        keys = []
        for row in rows:
            keys.extend(k for k in row if k not in keys)
        return keys

    write_table(out / 'report_laps.csv', laps, union(laps) or ('run', 'lap', 't_start', 't_end', 'lap_time', 'off_track'))
    write_table(out / 'report_params.csv', params, union(params) or ('run', 't'))
    write_table(out / 'report_noise.csv', noise, union(noise) or ('run', 't'))
    write_table(out / 'report_trajectory.csv', trajectory, ('run', 't', 'p_x', 'p_y', 'V_x'))
    inputs = [p for run in runs for p in sorted(run.glob('*.csv'))]
    _finish(out, cfg, 'report', cfg.seed, ['report_laps.csv', 'report_params.csv', 'report_noise.csv', 'report_trajectory.csv'], inputs)
    return EXIT_OK


COMMANDS = {
    'sim': cmd_sim,
    'race': cmd_race,
    'estimate': cmd_estimate,
    'smooth': cmd_smooth,
    'moi': cmd_moi,
    'report': cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rallykit', description='Vehicle estimation and control experiments on a simulated oval track')
    sub = parser.add_subparsers(dest='command', required=True)
    helps = {
        'sim': 'closed-loop run with the configured driver, writes truth and sensor logs',
        'race': 'closed-loop MPPI laps',
        'estimate': 'joint state/parameter UKF on a sensor log',
        'smooth': 'GPS/IMU factor-graph smoother on a sensor log',
        'moi': 'moments of inertia from bifilar pendulum recordings',
        'report': 'aggregate run directories into plot-ready tables',
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument('--config', required=True, help='experiment YAML')
        p.add_argument('--output', default=None, help='output directory, default <config output>/<command>')
        p.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
        p.add_argument('--input', nargs='+', default=None, help='input files or run directories')
        if name == 'race':
            p.add_argument('--seeds', nargs='+', type=int, default=None, help='run one seed per directory, concurrently')
            p.add_argument('--jobs', type=int, default=None, help='worker processes for --seeds')
        if name == 'report':
            p.add_argument('--decimate', type=int, default=10, help='keep every n-th trajectory and estimate row')
    return parser


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, GeometryError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except (FileNotFoundError, InsufficientDataError, DomainError) as e:
        logger.error(f'input error: {e}')
        return EXIT_INPUT
    except NumericalError as e:
        logger.error(f'numerical failure: {e}')
        return EXIT_NUMERICAL
