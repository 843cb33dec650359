import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np
from scipy.integrate import solve_ivp

def run():
    sample_rate = 100.0
    # small-angle bifilar pendulum: theta'' = -(m g b^2 / (I d)) theta
    for m, b, d, I in [(1.64, 0.182, 0.935, 0.048), (1.78, 0.182, 0.915, 0.044), (21.88, 0.26, 1.93, 1.124)]:
        omega2 = m * 9.81 * b ** 2 / (I * d)
        T = 2 * np.pi / np.sqrt(omega2)
        t = np.arange(0, 65 * T, 1 / sample_rate)
        solution = solve_ivp(
            lambda _, y: [y[1], -omega2 * y[0]], (0, t[-1]), [0.05, 0.0],
            t_eval=t, method='DOP853', rtol=1e-10, atol=1e-12,
        )
        period = rallykit.oscillation_period(solution.y[0], sample_rate, 60)
        actual = rallykit.bifilar_moi(rallykit.BifilarSetup.symmetric(m, b, d), period)
        assert abs(actual - I) / I < 0.01, '\n' + \
            'Input:\n' + \
            f'\tm: {m}, b: {b}, d: {d}, period: {period}\n' + \
            'Actual:\n' + \
            f'{actual}\n' + \
            'Expected:\n' + \
            f'{I}'


if __name__ == '__main__':
    run()
