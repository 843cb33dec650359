import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    track, costmap = rallykit.build_oval_track()
    vehicle = rallykit.VehicleParams()
    params = rallykit.MppiParams(K=16, T=10)
    state = rallykit.initial_state(track, vehicle, speed=5.0)
    U = np.tile([0.1, 0.3], (10, 1))

    rollouts = rallykit.sample_rollouts(U, state, params, costmap, vehicle, seed=3, step=7)
    assert rollouts.controls.shape == (16, 10, 2) and rollouts.noise.shape == (16, 10, 2)
    assert rollouts.costs.shape == (16,) and rollouts.states.shape == (16, 11, 8)
    assert np.all(np.abs(rollouts.controls) <= 1.0)
    assert np.allclose(rollouts.noise, rollouts.controls - U)
    assert np.all(rollouts.states[:, 0] == state) and np.all(np.isfinite(rollouts.costs))

    # every rollout has its own stream: any subset reproduces its rows
    subset = rallykit.sample_rollouts(U, state, params, costmap, vehicle, seed=3, step=7, indices=[3, 11])
    assert np.array_equal(subset.controls, rollouts.controls[[3, 11]])
    assert np.allclose(subset.states, rollouts.states[[3, 11]]) and np.allclose(subset.costs, rollouts.costs[[3, 11]])
    again = rallykit.sample_rollouts(U, state, params, costmap, vehicle, seed=3, step=7)
    assert np.array_equal(again.controls, rollouts.controls)
    other = rallykit.sample_rollouts(U, state, params, costmap, vehicle, seed=3, step=8)
    assert not np.array_equal(other.controls, rollouts.controls)

    # the cost is the sum of running costs along each rollout
    expected = sum(rallykit.running_cost(rollouts.states[:, t + 1], costmap, params, t) for t in range(10))
    assert np.allclose(rollouts.costs, expected)

    # without sampling noise every rollout follows the nominal sequence
    still = rallykit.sample_rollouts(U, state, rallykit.MppiParams(K=4, T=10, sigma=(0.0, 0.0)), costmap, vehicle)
    assert np.all(still.controls == U) and np.allclose(still.states, still.states[0])
