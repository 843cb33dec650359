import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import rallykit
import numpy as np
from _states import random_states

def run():
    p = rallykit.VehicleParams(w_f=0.0, w_r=0.0)
    s, u = random_states(100)

    # with zero track width the four-wheel model reduces to the lumped-axle one
    expected = rallykit.single_track_derivatives(s, u, p)
    actual = rallykit.double_track_derivatives(s, u, p)
    assert np.allclose(actual, expected, rtol=1e-9, atol=1e-9), '\n' + \
        'Input:\n' + \
        f'{s}\n' + \
        'Actual:\n' + \
        f'{actual}\n' + \
        'Expected:\n' + \
        f'{expected}'

    # with track width the models differ only through load transfer and wheel speeds
    p = rallykit.VehicleParams()
    wide = rallykit.double_track_derivatives(s, u, p)
    assert wide.shape == s.shape and np.all(np.isfinite(wide))
    assert np.allclose(wide[:, 3:6], expected[:, 3:6]), 'kinematic rows must not depend on the tire model'
