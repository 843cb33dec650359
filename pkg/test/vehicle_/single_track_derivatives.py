import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import rallykit
import numpy as np
from rallykit._helpers import DomainError
from _states import random_states

def run():
    p = rallykit.VehicleParams()

    # free rolling in a straight line: no slip, no force
    V = 5.0
    s = np.array([V, 0.0, 0.0, 0.3, 1.0, 2.0, V / p.R, V / p.R])
    actual = rallykit.single_track_derivatives(s, np.zeros(3), p)
    expected = np.array([0.0, 0.0, 0.0, 0.0, V * np.cos(0.3), V * np.sin(0.3), 0.0, 0.0])
    assert np.allclose(actual, expected, atol=1e-9), '\n' + \
        'Input:\n' + \
        f'{s}\n' + \
        'Actual:\n' + \
        f'{actual}\n' + \
        'Expected:\n' + \
        f'{expected}'

    # drive torque spins up the rear wheel before any slip develops
    actual = rallykit.single_track_derivatives(s, np.array([0.0, 2.0, 0.0]), p)
    assert np.isclose(actual[7], 2.0 / p.I_r), f'{actual[7]} != {2.0 / p.I_r}'

    # batches evaluate row by row
    s, u = random_states(20)
    batch = rallykit.single_track_derivatives(s, u, p)
    rows = np.stack([rallykit.single_track_derivatives(s[i], u[i], p) for i in range(len(s))])
    assert np.allclose(batch, rows, rtol=1e-12, atol=1e-12)

    # mirroring the state and steering mirrors the motion
    flip = np.array([1, -1, -1, -1, 1, -1, 1, 1])
    mirrored = rallykit.single_track_derivatives(s * flip, u * np.array([-1, 1, 1]), p)
    assert np.allclose(mirrored, batch * flip, rtol=1e-9, atol=1e-9), '\n' + \
        'Actual:\n' + \
        f'{mirrored}\n' + \
        'Expected:\n' + \
        f'{batch * flip}'

    bad = s[0].copy()
    bad[1] = np.nan
    try:
        rallykit.single_track_derivatives(bad, u[0], p)
    except DomainError:
        pass
    else:
        raise AssertionError('non-finite state accepted')
    assert np.all(np.isnan(rallykit.single_track_derivatives(bad, u[0], p, strict=False)[:3]))
