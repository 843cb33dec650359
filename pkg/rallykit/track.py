import logging
from dataclasses import dataclass
from typing import *

import numpy as np

from ._helpers import ConfigError
from .transforms import wrap_angle


__all__ = [
    'TrackMap',
    'CostMap',
    'ReferenceTrajectory',
    'build_oval_track',
    'signed_distance',
    'reference_trajectory',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackMap:
    """Flat oval: two straights joined by 180 degree constant-radius turns.

    The centerline is the set of points at distance `radius` from the segment
    x in [-S/2, S/2], y = 0. It is travelled counter-clockwise; arc length 0
    is the start line at (0, -radius), heading +x.
    """
    straight_length: float = 11.5
    width: float = 3.3
    radius: float = 6.1

    @property
    def length(self) -> float:
        "Centerline length (m)"
        return 2 * self.straight_length + 2 * np.pi * self.radius

    @property
    def extents(self) -> Tuple[float, float]:
        "Outer boundary extents (m) along x and y"
        outer = self.radius + self.width / 2
        return self.straight_length + 2 * outer, 2 * outer

    def segment_distance(self, p: np.ndarray) -> np.ndarray:
        "Distance of [..., 2] points to the spine segment"
        p = np.asarray(p, dtype=float)
        return np.hypot(np.maximum(np.abs(p[..., 0]) - self.straight_length / 2, 0.0), p[..., 1])

    def centerline_distance(self, p: np.ndarray) -> np.ndarray:
        return np.abs(self.segment_distance(p) - self.radius)

    def centerline_point(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Centerline position and heading at arc length s.

        Args:
            s (np.ndarray): [...] arc length (m), taken modulo the lap length

        Returns:
            (position [..., 2], heading [...])
        """
        S, R = self.straight_length, self.radius
        s = np.mod(np.asarray(s, dtype=float), self.length)
        s1, s2, s3, s4 = S / 2, S / 2 + np.pi * R, 3 * S / 2 + np.pi * R, 3 * S / 2 + 2 * np.pi * R
        a_right = -np.pi / 2 + (s - s1) / R
        a_left = np.pi / 2 + (s - s3) / R
        x = np.select(
            [s < s1, s < s2, s < s3, s < s4],
            [s, S / 2 + R * np.cos(a_right), S / 2 - (s - s2), -S / 2 + R * np.cos(a_left)],
            -S / 2 + (s - s4),
        )
        y = np.select(
            [s < s1, s < s2, s < s3, s < s4],
            [np.full_like(s, -R), R * np.sin(a_right), np.full_like(s, R), R * np.sin(a_left)],
            -R,
        )
        heading = np.select(
            [s < s1, s < s2, s < s3, s < s4],
            [np.zeros_like(s), a_right + np.pi / 2, np.full_like(s, np.pi), a_left + np.pi / 2],
            0.0,
        )
        return np.stack([x, y], axis=-1), wrap_angle(heading)

    def progress(self, p: np.ndarray) -> np.ndarray:
        "Arc length of the centerline point nearest to [..., 2] positions, in [0, length)"
        S, R = self.straight_length, self.radius
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        a_right = np.arctan2(y, x - S / 2)
        a_left = np.mod(np.arctan2(y, x + S / 2), 2 * np.pi)
        s = np.select(
            [x > S / 2, x < -S / 2, y < 0],
            [S / 2 + R * (a_right + np.pi / 2), 3 * S / 2 + np.pi * R + R * (a_left - np.pi / 2), x],
            S / 2 + np.pi * R + (S / 2 - x),
        )
        return np.mod(s, self.length)

    def curvature(self, s: np.ndarray) -> np.ndarray:
        S, R = self.straight_length, self.radius
        s = np.mod(np.asarray(s, dtype=float), self.length)
        on_arc = ((s >= S / 2) & (s < S / 2 + np.pi * R)) | ((s >= 3 * S / 2 + np.pi * R) & (s < 3 * S / 2 + 2 * np.pi * R))
        return np.where(on_arc, 1 / R, 0.0)


def signed_distance(track: TrackMap, p: np.ndarray) -> np.ndarray:
    """Distance to the nearest track boundary, negative on the track.

    Args:
        track (TrackMap): the track
        p (np.ndarray): [..., 2] world positions (m)

    Returns:
        np.ndarray: [...] signed distance (m)
    """
    return track.centerline_distance(p) - track.width / 2


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


@dataclass(frozen=True)
class CostMap:
    """Uniform grid of positional costs in [0, 1], 0 on the track.

    `costs[i, j]` is the cost of the cell centered at
    (origin_x + (j + 0.5) resolution, origin_y + (i + 0.5) resolution).
    """
    costs: np.ndarray
    origin: Tuple[float, float]
    resolution: float

    @property
    def shape(self) -> Tuple[int, int]:
        return self.costs.shape

    def cell_centers(self) -> np.ndarray:
        "[H, W, 2] world coordinates of the cell centers"
        H, W = self.costs.shape
        u = self.origin[0] + (np.arange(W) + 0.5) * self.resolution
        v = self.origin[1] + (np.arange(H) + 0.5) * self.resolution
        u, v = np.meshgrid(u, v, indexing='xy')
        return np.stack([u, v], axis=-1)

    def world_to_grid(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        "Row and column indices of the cells containing [..., 2] points; may be out of range"
        p = np.asarray(p, dtype=float)
        with np.errstate(invalid='ignore'):
            j = np.floor((p[..., 0] - self.origin[0]) / self.resolution)
            i = np.floor((p[..., 1] - self.origin[1]) / self.resolution)
        return i, j

    def contains(self, p: np.ndarray) -> np.ndarray:
        i, j = self.world_to_grid(p)
        H, W = self.costs.shape
        return (i >= 0) & (i < H) & (j >= 0) & (j < W)

    def query(self, p: np.ndarray) -> np.ndarray:
        """Cost of the cells containing [..., 2] points; 1 outside the grid or for non-finite points"""
        i, j = self.world_to_grid(p)
        inside = self.contains(p)
        H, W = self.costs.shape
        ii = np.where(inside, i, 0).astype(np.intp)
        jj = np.where(inside, j, 0).astype(np.intp)
        return np.where(inside, self.costs[ii, jj], 1.0)


def build_oval_track(
    straight_length: float = 11.5,
    width: float = 3.3,
    outer_length: float = 27.5,
    outer_width: float = 15.5,
    resolution: float = 0.05,
    margin: float = 0.3,
    padding: float = 2.0,
    tolerance: float = 0.6,
) -> Tuple[TrackMap, CostMap]:
    """Oval track and its cost map from the surveyed outer extents.

    The turn radius follows from the outer width; the outer length implied by
    it must agree with `outer_length` within `tolerance`.

    Args:
        straight_length (float): length of each straight (m)
        width (float): track width (m)
        outer_length (float): outer extent along the straights (m)
        outer_width (float): outer extent across the straights (m)
        resolution (float): cost-map cell size (m)
        margin (float): width of the 0 to 1 cost ramp outside the boundaries (m)
        padding (float): grid margin around the outer boundary (m)
        tolerance (float): allowed mismatch of the derived outer length (m)

    Returns:
        (TrackMap, CostMap)
    """
    for name, value in (('straight_length', straight_length), ('width', width), ('resolution', resolution), ('margin', margin)):
        if not value > 0:
            raise ConfigError(f'track {name} must be positive, got {value}')
    if padding < 0 or tolerance < 0:
        raise ConfigError('track padding and tolerance must be nonnegative')
    radius = (outer_width - width) / 2
    if radius <= width / 2:
        raise ConfigError(f'outer width {outer_width} leaves no infield for a {width} m wide track')
    track = TrackMap(straight_length=straight_length, width=width, radius=radius)
    derived_length = track.extents[0]
    if abs(derived_length - outer_length) > tolerance:
        raise ConfigError(
            f'inconsistent track geometry: straights {straight_length} and turn radius {radius:.3f} '
            f'give an outer length of {derived_length:.3f}, expected {outer_length} (tolerance {tolerance})'
        )
    if derived_length != outer_length:
        logger.info(f'derived outer length {derived_length:.3f} m vs surveyed {outer_length} m')

    half_x = derived_length / 2 + padding
    half_y = track.extents[1] / 2 + padding
    W, H = int(np.ceil(2 * half_x / resolution)), int(np.ceil(2 * half_y / resolution))
    origin = (-W * resolution / 2, -H * resolution / 2)
    grid = CostMap(np.zeros((H, W)), origin, resolution)
    sd = signed_distance(track, grid.cell_centers())
    costs = np.where(sd > 0, _smoothstep(sd / margin), 0.0)
    return track, CostMap(costs, origin, resolution)


class ReferenceTrajectory(NamedTuple):
    t: np.ndarray               # [N]
    position: np.ndarray        # [N, 2]
    velocity: np.ndarray        # [N, 2] world frame
    acceleration: np.ndarray    # [N, 2] world frame
    heading: np.ndarray         # [N]
    yaw_rate: np.ndarray        # [N]


def reference_trajectory(track: TrackMap, speed: float, duration: float, rate: float, start: float = 0.0) -> ReferenceTrajectory:
    """Constant-speed drive along the centerline.

    Args:
        track (TrackMap): the track
        speed (float): m/s
        duration (float): s
        rate (float): samples per second
        start (float): initial arc length (m)

    Returns:
        ReferenceTrajectory sampled at t = 0, 1/rate, ..., duration
    """
    assert rate > 0 and duration >= 0
    t = np.arange(int(round(duration * rate)) + 1) / rate
    s = start + speed * t
    position, heading = track.centerline_point(s)
    yaw_rate = speed * track.curvature(s)
    direction = np.stack([np.cos(heading), np.sin(heading)], axis=-1)
    normal = np.stack([-np.sin(heading), np.cos(heading)], axis=-1)
    return ReferenceTrajectory(
        t=t,
        position=position,
        velocity=speed * direction,
        acceleration=(speed * yaw_rate)[:, None] * normal,
        heading=heading,
        yaw_rate=yaw_rate,
    )
