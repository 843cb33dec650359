import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def _open_loop_driver(controller):
    "Executes each optimized sequence to its end before planning again"
    plan, index = None, 0

    def driver(t, state):
        nonlocal plan, index
        if index % controller.params.T == 0:
            plan = controller.optimize(state).copy()
            controller.U = np.repeat(plan[-1:], controller.params.T, axis=0)
        u = plan[index % controller.params.T]
        index += 1
        return float(u[0]), float(u[1])

    return driver

def _mean_cost(log, costmap, params, ratio):
    return float(np.mean(rallykit.running_cost(log.states[::ratio], costmap, params)))

def run():
    track, costmap = rallykit.build_oval_track()
    vehicle = rallykit.VehicleParams()
    params = rallykit.MppiParams(v_desired=6.0)
    cfg = rallykit.ClosedLoopConfig(
        duration=10.0, physics_rate=200.0, control_rate=40.0,
        feedback='noisy', process_noise=0.5, initial_speed=3.0, terminate_on_boundary=False,
    )
    ratio = 5

    # on the noisy simulator, replanning from every feedback state costs less than following each plan blind
    for seed in (0, 1):
        closed = rallykit.run_closed_loop(
            rallykit.single_track_derivatives, rallykit.mppi_driver(rallykit.MppiController(params, costmap, vehicle, seed=seed)),
            track, costmap, cfg, vehicle, seed=seed,
        )
        opened = rallykit.run_closed_loop(
            rallykit.single_track_derivatives, _open_loop_driver(rallykit.MppiController(params, costmap, vehicle, seed=seed)),
            track, costmap, cfg, vehicle, seed=seed,
        )
        assert closed.status == 'completed' and closed.boundary_violations == 0, f'seed {seed}: {closed.status}'
        receding, planned = _mean_cost(closed, costmap, params, ratio), _mean_cost(opened, costmap, params, ratio)
        assert receding < planned, '\n' + \
            'Input:\n' + \
            f'\tseed: {seed}\n' + \
            'Actual:\n' + \
            f'\treceding horizon {receding}, open loop {planned} ({opened.status})\n' + \
            'Expected:\n' + \
            '\treceding horizon cheaper'

if __name__ == '__main__':
    run()
