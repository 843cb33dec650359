import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
from rallykit.cli import main
import json
import tempfile
import numpy as np

CONFIG = '''\
seed: 4
duration: 4.0
simulation:
  initial_speed: 3.0
moi:
  n_periods: 20
estimator:
  initial_error: 0.3
'''

def _manifest(path):
    with open(os.path.join(path, 'manifest.json'), encoding='utf-8') as fp:
        return json.load(fp)

def run():
    with tempfile.TemporaryDirectory() as root:
        config = os.path.join(root, 'exp.yaml')
        with open(config, 'w', encoding='utf-8') as fp:
            fp.write(CONFIG)
        sim, sim_again = os.path.join(root, 'sim'), os.path.join(root, 'sim_again')

        assert main(['sim', '--config', config, '--output', sim, '--log-level', 'WARNING']) == 0
        manifest = _manifest(sim)
        assert manifest['command'] == 'sim' and manifest['seed'] == 4
        assert set(manifest['files']) == {'config.yaml', 'sensors.jsonl', 'trajectory.jsonl', 'trajectory.csv', 'commands.csv', 'laps.csv', 'summary.csv'}
        streams = rallykit.io.read_sensor_log(os.path.join(sim, 'sensors.jsonl'))
        assert set(streams) == {'gps', 'imu', 'wheels', 'odom', 'control', 'truth'}
        assert np.isclose(streams['truth'].t[-1], 4.0) and len(streams['truth'].t) == 801

        # reruns are byte-identical and the echoed config reads back
        assert main(['sim', '--config', config, '--output', sim_again, '--log-level', 'WARNING']) == 0
        assert _manifest(sim_again) == manifest
        echoed = rallykit.io.load_config(os.path.join(sim, 'config.yaml'))
        assert echoed == rallykit.io.load_config(config) and rallykit.io.config_hash(echoed) == manifest['config_hash']

        estimate = os.path.join(root, 'estimate')
        assert main(['estimate', '--config', config, '--input', os.path.join(sim, 'sensors.jsonl'), '--output', estimate, '--log-level', 'WARNING']) == 0
        params = rallykit.io.read_table(os.path.join(estimate, 'params.csv'))
        assert [row['parameter'] for row in params] == ['D', 'm', 'I_z']
        assert all(np.isclose(float(row['initial']), 1.3 * float(row['truth'])) for row in params)
        header, table = rallykit.io.read_array_table(os.path.join(estimate, 'estimate.csv'))
        assert header[:9] == ('t', *rallykit.STATE3_FIELDS) and len(table) == 400 and np.all(np.isfinite(table))
        assert _manifest(estimate)['inputs'] == {'sensors.jsonl': manifest['files']['sensors.jsonl']}

        smooth = os.path.join(root, 'smooth')
        assert main(['smooth', '--config', config, '--input', os.path.join(sim, 'sensors.jsonl'), '--output', smooth, '--log-level', 'WARNING']) == 0
        (summary,) = rallykit.io.read_table(os.path.join(smooth, 'smoother.csv'))
        assert int(summary['nodes']) == 41 and float(summary['rmse_map']) < float(summary['rmse_gps']), f'{summary}'
        header, _ = rallykit.io.read_array_table(os.path.join(smooth, 'map.csv'))
        assert header[:4] == ('t', 'p_x', 'p_y', 'p_z')

        report = os.path.join(root, 'report')
        assert main(['report', '--config', config, '--input', sim, estimate, '--output', report, '--decimate', '5', '--log-level', 'WARNING']) == 0
        rows = rallykit.io.read_table(os.path.join(report, 'report_params.csv'))
        assert len(rows) == 80 and {row['run'] for row in rows} == {'estimate'} and set(rows[0]) == {'run', 't', 'D', 'm', 'I_z'}
        rows = rallykit.io.read_table(os.path.join(report, 'report_trajectory.csv'))
        assert {row['run'] for row in rows} == {'sim'}

        # pendulum recordings, axis taken from the file name
        T = 1.3
        t = np.arange(0, 30 * T, 0.01)
        recording = os.path.join(root, 'front_wheel.csv')
        rallykit.io.write_array_table(recording, ('t_s', 'angle_rad'), np.stack([t, 0.05 * np.sin(2 * np.pi * t / T)], axis=-1))
        moi = os.path.join(root, 'moi')
        assert main(['moi', '--config', config, '--input', recording, '--output', moi, '--log-level', 'WARNING']) == 0
        (row,) = rallykit.io.read_table(os.path.join(moi, 'moi.csv'))
        assert row['axis'] == 'front_wheel' and abs(float(row['period']) - T) / T < 1e-3
        setup = rallykit.BifilarSetup(m=1.64, R_1=0.182, R_2=0.182, d=0.935)
        assert np.isclose(float(row['moi']), rallykit.bifilar_moi(setup, float(row['period'])))

        # exit codes
        bad = os.path.join(root, 'bad.yaml')
        with open(bad, 'w', encoding='utf-8') as fp:
            fp.write('seed: 1\ncontroller:\n  horizon: 3\n')
        assert main(['sim', '--config', bad, '--output', os.path.join(root, 'x')]) == 2
        assert main(['estimate', '--config', config, '--input', os.path.join(root, 'missing.jsonl'), '--output', os.path.join(root, 'x')]) == 3
        yaw = os.path.join(root, 'yaw.csv')
        rallykit.io.write_array_table(yaw, ('t_s', 'angle_rad'), np.stack([t, np.sin(t)], axis=-1))
        assert main(['moi', '--config', config, '--input', yaw, '--output', os.path.join(root, 'x')]) == 2
        gps_only = os.path.join(root, 'gps.jsonl')
        rallykit.io.write_sensor_log(gps_only, {'gps': streams['gps']})
        assert main(['estimate', '--config', config, '--input', gps_only, '--output', os.path.join(root, 'x')]) == 3

    _race()


RACE_CONFIG = '''\
seed: 1
duration: 0.5
controller:
  K: 16
  T: 10
'''

def _race():
    with tempfile.TemporaryDirectory() as root:
        config = os.path.join(root, 'race.yaml')
        with open(config, 'w', encoding='utf-8') as fp:
            fp.write(RACE_CONFIG)
        race = os.path.join(root, 'race')
        assert main(['race', '--config', config, '--seeds', '0', '1', '--jobs', '2', '--output', race, '--log-level', 'WARNING']) == 0
        assert sorted(os.listdir(race)) == ['seed_0', 'seed_1']
        assert _manifest(os.path.join(race, 'seed_0'))['seed'] == 0

        # a worker process gives the same files as an in-process run of the same seed
        single = os.path.join(root, 'single')
        assert main(['race', '--config', config, '--output', single, '--log-level', 'WARNING']) == 0
        assert _manifest(single)['files'] == _manifest(os.path.join(race, 'seed_1'))['files']
        (summary,) = rallykit.io.read_table(os.path.join(single, 'summary.csv'))
        assert summary['status'] == 'completed'
