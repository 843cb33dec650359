import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

# two integrators x_{t+1} = x_t + dt u_t, cost sum_t |x_t|^2
DT = 0.1
X0 = np.array([1.0, -0.5])

def _trajectory_cost(U):
    x = X0 + DT * np.cumsum(U, axis=-2)
    return np.sum(np.square(x), axis=(-2, -1))

def _rollouts(U, params, seed, step):
    rng = np.random.default_rng([seed, step])
    E = np.clip(U + rng.standard_normal((params.K, params.T, 2)) * np.asarray(params.sigma), -1.0, 1.0)
    return rallykit.Rollouts(E, E - U, _trajectory_cost(E), np.zeros((params.K, params.T + 1, 2)))

def run():
    params = rallykit.MppiParams(K=256, T=20, lambda_=1.0, gamma=0.0, sigma=(0.05, 0.05))
    costs = np.zeros((20, 51))
    for seed in range(20):
        U = np.zeros((params.T, 2))
        costs[seed, 0] = _trajectory_cost(U)
        for step in range(50):
            U = rallykit.mppi_update(U, _rollouts(U, params, seed, step), params)
            costs[seed, step + 1] = _trajectory_cost(U)

    # averaged over seeds, the cost of the planned sequence never rises
    mean = costs.mean(axis=0)
    rises = np.flatnonzero(np.diff(mean) > 1e-12)
    assert len(rises) == 0, '\n' + \
        'Input:\n' + \
        f'\titerations {rises + 1}\n' + \
        'Actual:\n' + \
        f'\t{mean[rises]} -> {mean[rises + 1]}\n' + \
        'Expected:\n' + \
        '\tnonincreasing'
    assert mean[-1] < 0.9 * mean[0], f'{mean[0]} -> {mean[-1]}'

if __name__ == '__main__':
    run()
