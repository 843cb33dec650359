import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    rng = np.random.default_rng(4)
    a = 0.9
    model = rallykit.FilterModel(f=lambda X, u: a * X + u, h=lambda X, u: X, n_state=1)
    initial = rallykit.NoiseStatistics.from_sigmas([0.2], [0.3])

    # without adaptation the step is a plain predict/update
    belief = rallykit.Belief(np.array([0.5]), np.array([[0.4]]))
    windows = rallykit.NoiseSampleWindow(50)
    z, u = np.array([0.7]), np.array([0.1])
    actual, stats = rallykit.alm_ukf_step(belief, initial, windows, z, u, model, adaptive=False)
    predicted = rallykit.ukf_predict(belief, u, model.f, initial)
    expected, _ = rallykit.ukf_update(predicted, z, model.h, initial, u=u)
    assert np.allclose(actual.mean, expected.mean) and np.allclose(actual.cov, expected.cov), '\n' + \
        'Actual:\n' + \
        f'{actual}\n' + \
        'Expected:\n' + \
        f'{expected}'
    assert stats is initial and len(windows.observation) == 0

    # with adaptation the windows fill up to their capacity and the statistics follow them
    x = 0.0
    stats = initial
    for k in range(80):
        u = np.array([np.sin(0.3 * k)])
        x = a * x + u[0] + rng.normal() * 0.1
        z = np.array([x + rng.normal() * 0.2])
        belief, stats = rallykit.alm_ukf_step(belief, stats, windows, z, u, model, min_samples=10)
        if k < 9:
            assert np.array_equal(stats.R, initial.R) and np.array_equal(stats.Q, initial.Q)
        assert len(windows.observation) == min(k + 1, 50) and len(windows.process) == min(k + 1, 50)
        assert np.all(np.linalg.eigvalsh(stats.R) > 0) and np.all(np.linalg.eigvalsh(stats.Q) > 0)
    r_hat, R_hat = rallykit.estimate_observation_noise(windows)
    assert np.allclose(stats.r, r_hat) and np.allclose(stats.R, R_hat)
    assert not np.allclose(stats.R, initial.R)
