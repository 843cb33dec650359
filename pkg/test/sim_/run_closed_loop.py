import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
from rallykit._helpers import ConfigError
import numpy as np

def run():
    track, costmap = rallykit.build_oval_track()
    vehicle = rallykit.VehicleParams()

    # no command, no motion
    log = rallykit.run_closed_loop(rallykit.single_track_derivatives, rallykit.zero_driver, track, costmap, rallykit.ClosedLoopConfig(duration=1.0))
    assert log.status == 'completed' and len(log.t) == 1001 and log.states.shape == (1001, 8) and log.controls.shape == (1001, 3)
    assert np.allclose(log.states, log.states[0]) and not log.laps
    assert len(log.commands) == 40 and log.commands[0]['motion_enabled']
    assert np.allclose(log.states[0, 4:6], track.centerline_point(0.5)[0])

    # seeded process noise reproduces exactly
    cfg = rallykit.ClosedLoopConfig(duration=3.0, process_noise=0.2, initial_speed=3.0)
    driver = rallykit.excitation_driver(track, vehicle)
    a = rallykit.run_closed_loop(rallykit.single_track_derivatives, driver, track, costmap, cfg, seed=5)
    b = rallykit.run_closed_loop(rallykit.single_track_derivatives, driver, track, costmap, cfg, seed=5)
    c = rallykit.run_closed_loop(rallykit.single_track_derivatives, driver, track, costmap, cfg, seed=6)
    assert np.array_equal(a.states, b.states) and a.commands == b.commands
    assert not np.array_equal(a.states, c.states)

    # a lap is counted at the start line
    cfg = rallykit.ClosedLoopConfig(duration=20.0, initial_speed=4.0)
    log = rallykit.run_closed_loop(rallykit.single_track_derivatives, rallykit.excitation_driver(track, vehicle, speed=4.0), track, costmap, cfg)
    assert log.status == 'completed' and log.boundary_violations == 0
    assert len(log.laps) == 1, f'{log.laps}'
    lap = log.laps[0]
    assert lap.lap == 1 and lap.t_start == 0.0 and np.isclose(lap.lap_time, lap.t_end - lap.t_start)
    assert 10.0 < lap.lap_time < 20.0, f'{lap.lap_time}'

    # human override wins while fresh; a runstop release holds the throttle at neutral
    cfg = rallykit.ClosedLoopConfig(
        duration=4.0, initial_speed=3.0,
        human_windows=((1.0, 2.0, 0.0, -0.5),),
        runstop_schedule=((0.0, 'remote', True), (3.0, 'remote', False)),
    )
    log = rallykit.run_closed_loop(rallykit.single_track_derivatives, rallykit.excitation_driver(track, vehicle), track, costmap, cfg)
    for command in log.commands:
        t = command['t']
        if 1.0 <= t < 2.0:
            assert command['throttle_sender'] == 'human' and command['throttle'] == -0.5 and command['steering'] == 0.0, f'{command}'
        elif t < 1.0 or 2.25 <= t:
            assert command['steering_sender'] == 'auto', f'{command}'
        if t >= 3.0 - 1e-9:
            assert not command['motion_enabled'] and command['throttle'] == 0.0 and command['throttle_us'] == 1500.0
        else:
            assert command['motion_enabled']
    assert set(log.commands[0]) == {'t', *rallykit.CHANNELS, *(f'{c}_us' for c in rallykit.CHANNELS), *(f'{c}_sender' for c in rallykit.CHANNELS), 'motion_enabled'}

    # full throttle down the straight leaves the map
    full_throttle = lambda t, state: (0.0, 1.0)
    log = rallykit.run_closed_loop(rallykit.single_track_derivatives, full_throttle, track, costmap, rallykit.ClosedLoopConfig(duration=10.0))
    assert log.status == 'boundary_violation' and log.boundary_violations == 1 and log.off_track >= 1
    assert not costmap.contains(log.states[-1, 4:6]) and log.t[-1] < 10.0

    for kwargs in [dict(control_rate=300.0), dict(duration=-1.0), dict(feedback='oracle'), dict(physics_rate=10.0, control_rate=10.0)]:
        try:
            rallykit.ClosedLoopConfig(**kwargs)
        except ConfigError:
            pass
        else:
            raise AssertionError(f'closed-loop config {kwargs} accepted')
