import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    R = 0.0975
    for i in range(100):
        spatial = [np.random.randint(1, 10) for _ in range(np.random.randint(3))]
        v_x = np.random.uniform(-10, 10, spatial)
        v_y = np.random.uniform(-5, 5, spatial)
        omega = np.random.choice([-1, 1], spatial) * np.random.uniform(1, 100, spatial)
        expected_x = (v_x - omega * R) / (omega * R)
        expected_y = v_y / (omega * R)
        actual = rallykit.wheel_slip(v_x, v_y, omega, R)
        assert np.allclose(actual.s_x, expected_x) and np.allclose(actual.s_y, expected_y), '\n' + \
            'Input:\n' + \
            f'\tv_x: {v_x}\n' + \
            f'\tv_y: {v_y}\n' + \
            f'\tomega: {omega}\n' + \
            'Actual:\n' + \
            f'{actual}\n' + \
            'Expected:\n' + \
            f'{expected_x}, {expected_y}'
        assert np.allclose(actual.s_total, np.hypot(expected_x, expected_y))

    # a locked wheel stays finite
    locked = rallykit.wheel_slip(np.array(2.0), np.array(0.5), np.array(0.0), R)
    assert np.all(np.isfinite([locked.s_x, locked.s_y, locked.s_total])), f'{locked}'
    assert np.isclose(locked.s_x, 2.0 / 1e-3) and np.isclose(locked.s_y, 0.5 / 1e-3)
