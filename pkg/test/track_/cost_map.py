import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    track, costmap = rallykit.build_oval_track(resolution=0.1, margin=0.3)
    centers = costmap.cell_centers()
    sd = rallykit.signed_distance(track, centers)
    costs = costmap.costs
    assert costs.min() >= 0.0 and costs.max() <= 1.0
    assert np.all(costs[sd <= 0] == 0.0), 'nonzero cost on the track'
    assert np.all(costs[sd >= 0.3] == 1.0), 'cost below 1 beyond the margin'
    ramp = (sd > 0) & (sd < 0.3)
    assert np.all((costs[ramp] > 0) & (costs[ramp] < 1))
    order = np.argsort(sd[ramp])
    assert np.all(np.diff(costs[ramp][order]) >= -1e-12), 'cost not monotone in the distance to the track'

    # queries hit the cell containing the point
    assert np.array_equal(costmap.query(centers), costs)
    rng = np.random.default_rng(21)
    p = rng.uniform(-9, 9, (100, 2))
    i, j = costmap.world_to_grid(p)
    assert np.array_equal(costmap.query(p), costs[i.astype(int), j.astype(int)])

    # outside the grid and non-finite points cost 1
    outside = np.array([[100.0, 0.0], [0.0, -100.0], [np.nan, 0.0], [np.inf, np.inf]])
    assert np.array_equal(costmap.query(outside), np.ones(4))
    assert not costmap.contains(outside).any()
    assert costmap.query(np.zeros((3, 7, 2))).shape == (3, 7)
