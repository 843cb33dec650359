import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def _dense(graph, values):
    N = graph.n_nodes * graph.block_size
    rows, residuals = [], []
    for lin in graph.linearize(values):
        F, m, _ = lin.jacobian.shape
        block = np.zeros((F * m, N))
        for f in range(F):
            block[f * m:(f + 1) * m, lin.columns[f]] = lin.jacobian[f]
        rows.append(block)
        residuals.append(lin.residual.reshape(-1))
    return np.concatenate(rows), np.concatenate(residuals)

def run():
    rng = np.random.default_rng(12)

    # GPS-only graphs are linear: one solve of the dense least squares problem is the optimum
    t_gps = np.arange(61) / 20
    truth = np.stack([3.0 * t_gps, np.sin(t_gps), np.zeros_like(t_gps)], axis=-1)
    gps = rallykit.SensorStream('gps', t_gps, truth + rng.normal(0, 0.02, truth.shape), ('x', 'y', 'z'))
    graph, initial = rallykit.build_graph(gps, cfg=rallykit.SmootherConfig(initial_damping=1e-12))
    result = rallykit.optimize(graph, initial)
    J, r = _dense(graph, initial)
    delta = np.linalg.lstsq(J, -r, rcond=None)[0]
    expected = initial.p + delta.reshape(graph.n_nodes, 3)
    assert result.converged and result.cost <= result.initial_cost
    assert np.allclose(result.values.p, expected, atol=1e-8), '\n' + \
        'Actual:\n' + \
        f'{result.values.p[:4]}\n' + \
        'Expected:\n' + \
        f'{expected[:4]}'

    # noise-free IMU and GPS on a straight line: the optimum is the truth
    speed = 2.0
    t_gps = np.arange(41) / 20
    gps = rallykit.SensorStream('gps', t_gps, np.stack([speed * t_gps, np.zeros_like(t_gps), np.zeros_like(t_gps)], axis=-1), ('x', 'y', 'z'))
    t_imu = np.arange(401) / 200
    imu_values = np.zeros((401, 6))
    imu_values[:, 2] = 9.81
    imu = rallykit.SensorStream('imu', t_imu, imu_values, ('a_x', 'a_y', 'a_z', 'w_x', 'w_y', 'w_z'))
    graph, truth_values = rallykit.build_graph(gps, imu)
    assert graph.cost(truth_values) < 1e-12, f'{graph.factor_costs(truth_values)}'
    result = rallykit.optimize(graph, truth_values)
    assert result.converged and np.allclose(result.values.p, truth_values.p, atol=1e-9)

    perturbed = truth_values.copy()
    perturbed.p[1:] += rng.normal(0, 0.1, perturbed.p[1:].shape)
    graph, _ = rallykit.build_graph(gps, imu, initial=perturbed)
    result = rallykit.optimize(graph, perturbed)
    assert result.cost < 1e-10 and result.cost < result.initial_cost, f'{result.initial_cost} -> {result.cost}'
    assert np.allclose(result.values.p, truth_values.p, atol=1e-5), '\n' + \
        'Actual:\n' + \
        f'{result.values.p}\n' + \
        'Expected:\n' + \
        f'{truth_values.p}'
    assert np.allclose(result.values.v, speed * np.array([1.0, 0.0, 0.0]), atol=1e-5)
    assert np.allclose(result.values.b, 0, atol=1e-5)
