import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import rallykit
import numpy as np
from _states import random_states

def run():
    p = rallykit.VehicleParams()
    s, u = random_states(50, np.random.default_rng(7))

    # the resultant drives the planar accelerations of the derivative
    F_x, F_y, M_z = rallykit.body_forces(s, u, p)
    ds = rallykit.single_track_derivatives(s, u, p)
    V_x, V_y, r = s[:, 0], s[:, 1], s[:, 2]
    expected = np.stack([F_x / p.m + V_y * r, F_y / p.m - V_x * r, M_z / p.I_z], axis=-1)
    assert np.allclose(ds[:, :3], expected, rtol=1e-10, atol=1e-10), '\n' + \
        'Input:\n' + \
        f'{s[:3]}\n' + \
        'Actual:\n' + \
        f'{ds[:3, :3]}\n' + \
        'Expected:\n' + \
        f'{expected[:3]}'

    ds = rallykit.double_track_derivatives(s, u, p)
    F_x, F_y, M_z = rallykit.body_forces(s, u, p, model='double')
    expected = np.stack([F_x / p.m + V_y * r, F_y / p.m - V_x * r, M_z / p.I_z], axis=-1)
    assert np.allclose(ds[:, :3], expected, rtol=1e-10, atol=1e-10)

    # free rolling straight ahead carries no force
    V = 4.0
    s = np.array([V, 0.0, 0.0, 0.0, 0.0, 0.0, V / p.R, V / p.R])
    F_x, F_y, M_z = rallykit.body_forces(s, np.zeros(3), p)
    assert np.allclose([F_x, F_y, M_z], 0.0, atol=1e-9), f'{(F_x, F_y, M_z)}'
