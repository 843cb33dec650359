import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    params = rallykit.VehicleParams()
    commands = np.array([
        [1.0, 0.5, 0.0],
        [-0.5, -0.5, 1.0],
        [0.0, 0.0, 0.0],
    ])
    expected = np.array([
        [-0.35, 6.0, 0.0],
        [0.175, -4.0, 1.0],
        [0.0, 0.0, 0.0],
    ])
    actual = rallykit.commands_to_controls(commands, params)
    assert np.allclose(actual, expected), '\n' + \
        'Input:\n' + \
        f'{commands}\n' + \
        'Actual:\n' + \
        f'{actual}\n' + \
        'Expected:\n' + \
        f'{expected}'

    # two columns leave the front brake released; batches keep their shape
    batch = np.random.default_rng(31).uniform(-1, 1, (4, 5, 2))
    out = rallykit.commands_to_controls(batch, params)
    assert out.shape == (4, 5, 3) and np.all(out[..., 2] == 0)

    force = rallykit.VehicleParams(drive_mode='force')
    assert np.isclose(rallykit.commands_to_controls([0.0, 1.0], force)[1], 12.0 / force.R)

    u = rallykit.command_to_input(0.0, 0.25, 0.5, params)
    assert isinstance(u, rallykit.ControlInput)
    assert np.allclose(u.to_array(), [0.0, 3.0, 0.5])
