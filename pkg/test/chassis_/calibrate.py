import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
from rallykit._helpers import ConfigError
import numpy as np

def run():
    cal = rallykit.ActuatorCalibration()
    for value, expected in [(0.0, 1500.0), (-1.0, 1000.0), (1.0, 2000.0), (0.5, 1750.0), (-0.25, 1375.0)]:
        actual = rallykit.calibrate(value, cal, 'steering')
        assert actual == expected, '\n' + \
            'Input:\n' + \
            f'\t{value}\n' + \
            'Actual:\n' + \
            f'\t{actual}\n' + \
            'Expected:\n' + \
            f'\t{expected}'

    # the two halves may have different slopes
    skewed = rallykit.ActuatorCalibration(1100.0, 1450.0, 1900.0)
    assert rallykit.calibrate(0.0, skewed) == 1450.0
    assert np.isclose(rallykit.calibrate(-0.5, skewed), 1275.0) and np.isclose(rallykit.calibrate(0.5, skewed), 1675.0)

    rng = np.random.default_rng(30)
    values = np.sort(rng.uniform(-1, 1, 200))
    pulses = np.array([rallykit.calibrate(v, skewed, 'throttle') for v in values])
    assert np.all(np.diff(pulses) >= 0) and pulses.min() >= 1100.0 and pulses.max() <= 1900.0

    # out-of-range commands are clamped to the channel range
    assert rallykit.calibrate(1.5, cal, 'throttle') == 2000.0
    assert rallykit.calibrate(-3.0, cal, 'steering') == 1000.0
    assert rallykit.calibrate(-0.2, cal, 'front_brake') == 1500.0

    table = rallykit.CalibrationTable(throttle=skewed)
    assert table.pulses({'steering': 0.0, 'throttle': 0.0, 'front_brake': 1.0}) == {'steering': 1500.0, 'throttle': 1450.0, 'front_brake': 2000.0}

    for bad in [(1500.0, 1500.0, 2000.0), (1000.0, 2100.0, 2000.0)]:
        try:
            rallykit.ActuatorCalibration(*bad)
        except ConfigError:
            pass
        else:
            raise AssertionError(f'calibration {bad} accepted')
