import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np
from scipy.spatial.transform import Rotation

def run():
    for i in range(100):
        spatial = [np.random.randint(1, 10) for _ in range(np.random.randint(3))]
        euler = np.stack([
            np.random.uniform(-np.pi, np.pi, spatial),
            np.random.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, spatial),
            np.random.uniform(-np.pi, np.pi, spatial),
        ], axis=-1)
        expected = Rotation.from_euler('xyz', euler.reshape(-1, 3)).as_matrix().reshape(*spatial, 3, 3)
        actual = rallykit.euler_angles_to_matrix(euler)
        assert np.allclose(expected, actual), '\n' + \
            'Input:\n' + \
            f'{euler}\n' + \
            'Actual:\n' + \
            f'{actual}\n' + \
            'Expected:\n' + \
            f'{expected}'
        back = rallykit.matrix_to_euler_angles(actual)
        assert np.allclose(back, euler, atol=1e-8), '\n' + \
            'Input:\n' + \
            f'{euler}\n' + \
            'Actual:\n' + \
            f'{back}'
