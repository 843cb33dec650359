import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np
from rallykit._helpers import ConfigError

def _error(text, source='exp.yaml'):
    try:
        rallykit.io.parse_config(text, source)
    except ConfigError as e:
        return str(e)
    raise AssertionError(f'config accepted:\n{text}')

def run():
    cfg = rallykit.io.parse_config('seed: 3\n')
    assert cfg.seed == 3 and cfg.model == 'single' and cfg.duration == 60.0
    assert cfg.controller == rallykit.MppiParams() and cfg.smoother == rallykit.SmootherConfig()
    assert cfg.closed_loop().duration == 60.0

    cfg = rallykit.io.load_config(os.path.join(os.path.dirname(__file__), '..', '..', 'configs', 'default.yaml'))
    assert cfg.seed == 0 and cfg.driver == 'excitation' and cfg.controller.v_desired == 6.0
    assert set(cfg.moi.axes) == {'front_wheel', 'rear_wheel'} and cfg.moi.axes['rear_wheel'].d == 0.915
    assert cfg.smoother.gps_sigma == (0.02, 0.02, 0.02) and cfg.estimator.parameters == ('D', 'm', 'I_z')

    # the filter starts from the configured parameters, walking by 1e-6 per step
    assert cfg.estimator.initial_error == 0.0
    initial = np.array([0.9956, 21.88, 1.124])
    Q_p = np.square(cfg.estimator.parameter_walk_sigma(initial))
    assert np.allclose(Q_p, 1e-6, rtol=1e-12), '\n' + \
        'Actual:\n' + \
        f'{Q_p}\n' + \
        'Expected:\n' + \
        '1e-6'
    relative = rallykit.io.parse_config('seed: 1\nestimator:\n  parameter_walk: relative\n  parameter_sigma: 1e-4\n')
    assert np.allclose(relative.estimator.parameter_walk_sigma(initial), 1e-4 * initial)

    # only the synthetic identification run starts away from the truth
    cfg = rallykit.io.load_config(os.path.join(os.path.dirname(__file__), '..', '..', 'configs', 'identification.yaml'))
    assert cfg.estimator.initial_error == 0.3 and cfg.driver == 'excitation'
    assert np.allclose(np.square(cfg.estimator.parameter_walk_sigma(initial)), 1e-6)

    # exponents without a dot are read as numbers
    cfg = rallykit.io.parse_config('seed: 1\nsmoother:\n  gyro_bias_walk: 1e-5\n')
    assert cfg.smoother.gyro_bias_walk == 1e-5

    cases = [
        ('model: single\n', 'exp.yaml:1: <root>: missing required key seed'),
        ('seed: 1\ncontroller:\n  K: 64\n  Kx: 3\n', 'exp.yaml:4: controller.Kx:'),
        ('seed: 1\ncontroller:\n  K: many\n', 'exp.yaml:3: controller.K:'),
        ('seed: 1.5\n', 'exp.yaml:1: seed:'),
        ('seed: 1\nsensors:\n  gps_rate: -1.0\n', 'exp.yaml:2: sensors:'),
        ('seed: 1\nsimulation:\n  feedback: oracle\n', 'exp.yaml:3: simulation.feedback:'),
        ('seed: 1\nsimulation:\n  duration: 5.0\n', 'exp.yaml:3: simulation.duration:'),
        ('seed: 1\nsmoother:\n  gps_sigma: [0.1, 0.1]\n', 'exp.yaml:3: smoother.gps_sigma:'),
        ('seed: 1\nestimator:\n  model: full\n', 'exp.yaml:3: estimator.model:'),
        ('seed: 1\nestimator:\n  parameter_walk: scaled\n', 'exp.yaml:3: estimator.parameter_walk:'),
        ('seed: 1\nestimator:\n  parameter_sigma: -0.1\n', 'exp.yaml:2: estimator:'),
        ('seed: 1\nvehicle:\n  preset: go_kart\n', 'exp.yaml:2: vehicle:'),
        ('seed: 1\nmoi:\n  axes:\n    yaw: {m: 1.0, R_1: 0.1}\n', 'exp.yaml:4: moi.axes.yaw:'),
        ('seed: [1\n', 'exp.yaml:'),
    ]
    for text, prefix in cases:
        message = _error(text)
        assert message.startswith(prefix), '\n' + \
            'Input:\n' + \
            f'{text}' + \
            'Actual:\n' + \
            f'\t{message}\n' + \
            'Expected:\n' + \
            f'\t{prefix}...'

    # overrides are checked when the vehicle is built
    cfg = rallykit.io.parse_config('seed: 1\nvehicle:\n  overrides: {m: -2.0}\n')
    try:
        cfg.vehicle.params()
    except ConfigError:
        pass
    else:
        raise AssertionError('negative mass accepted')
