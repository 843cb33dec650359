import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    A = np.diag([0.9, 0.8, 0.7, 0.6])
    F = lambda X, u: X @ A.T
    x = np.random.uniform(-1, 1, 4)
    for H, expected in [
        (np.array([[1.0, 1.0, 1.0, 1.0]]), 4),
        (np.array([[1.0, 1.0, 1.0, 0.0]]), 3),
        (np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]), 2),
    ]:
        actual, singular = rallykit.observability_rank(F, lambda X, u: X @ H.T, x, None)
        assert actual == expected, '\n' + \
            'Input:\n' + \
            f'{H}\n' + \
            'Actual:\n' + \
            f'{actual} ({singular})\n' + \
            'Expected:\n' + \
            f'{expected}'
