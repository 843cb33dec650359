import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
import numpy as np

def run():
    track = rallykit.TrackMap()
    rng = np.random.default_rng(20)
    s = rng.uniform(0, track.length, 1000)
    center, heading = track.centerline_point(s)
    sd = rallykit.signed_distance(track, center)
    assert np.allclose(sd, -track.width / 2), '\n' + \
        'Actual:\n' + \
        f'{sd[:5]}\n' + \
        'Expected:\n' + \
        f'{-track.width / 2}'

    # moving along the left normal changes the distance linearly up to the boundaries
    normal = np.stack([-np.sin(heading), np.cos(heading)], axis=-1)
    for offset in [-2.0, -1.65, -0.5, 0.5, 1.65, 2.0]:
        actual = rallykit.signed_distance(track, center + offset * normal)
        assert np.allclose(actual, abs(offset) - track.width / 2, atol=1e-9), f'offset {offset}: {actual[:5]}'

    assert np.isclose(rallykit.signed_distance(track, [0.0, 0.0]), track.radius - track.width / 2)
    assert np.isclose(rallykit.signed_distance(track, [0.0, -track.radius - track.width / 2]), 0.0)
    assert rallykit.signed_distance(track, np.zeros((4, 5, 2))).shape == (4, 5)

    # progress inverts centerline_point
    progress = track.progress(center)
    assert np.allclose(progress, s, atol=1e-9), '\n' + \
        'Input:\n' + \
        f'{s[:5]}\n' + \
        'Actual:\n' + \
        f'{progress[:5]}'
    assert np.allclose(track.progress(center + 0.7 * normal), s, atol=1e-9)

    # headings follow the centerline tangent
    ahead, _ = track.centerline_point(s + 1e-6)
    tangent = (ahead - center) / 1e-6
    assert np.allclose(tangent, np.stack([np.cos(heading), np.sin(heading)], axis=-1), atol=1e-5)
    assert np.allclose(track.centerline_point(0.0)[0], [0.0, -track.radius])
    assert np.isclose(track.centerline_point(0.0)[1], 0.0)

    # headings are wrapped to (-pi, pi]; the return straight runs at +pi
    assert np.all((heading > -np.pi) & (heading <= np.pi)), f'{heading.min()} {heading.max()}'
    top = track.straight_length / 2 + np.pi * track.radius + track.straight_length / 2
    assert track.centerline_point(top)[1] == np.pi, f'{track.centerline_point(top)[1]}'

    curvature = track.curvature(s)
    on_arc = np.abs(center[:, 0]) > track.straight_length / 2
    assert np.allclose(curvature[on_arc], 1 / track.radius) and np.allclose(curvature[~on_arc], 0.0)
