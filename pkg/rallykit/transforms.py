import numpy as np
from typing import *
from scipy.spatial.transform import Rotation


__all__ = [
    'skew_symmetric',
    'axis_angle_to_matrix',
    'matrix_to_axis_angle',
    'euler_axis_angle_rotation',
    'euler_angles_to_matrix',
    'matrix_to_euler_angles',
    'wrap_angle',
    'lerp',
    'piecewise_lerp',
]


def skew_symmetric(v: np.ndarray):
    "Skew symmetric matrix from a 3D vector"
    v = np.asarray(v, dtype=float)
    assert v.shape[-1] == 3, "v must be 3D"
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    zeros = np.zeros_like(x)
    return np.stack([
        zeros, -z, y,
        z, zeros, -x,
        -y, x, zeros,
    ], axis=-1).reshape(*v.shape[:-1], 3, 3)


def axis_angle_to_matrix(axis_angle: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Exponential map of SO(3): rotation vector (axis times angle) to rotation matrix

    Args:
        axis_angle (np.ndarray): [..., 3] rotation vectors

    Returns:
        np.ndarray: [..., 3, 3] rotation matrices
    """
    axis_angle = np.asarray(axis_angle, dtype=float)
    angle = np.linalg.norm(axis_angle, axis=-1)[..., None, None]
    K = skew_symmetric(axis_angle)
    small = angle < 1e-6
    # Taylor terms near zero keep the map smooth for finite-difference Jacobians
    a = np.where(small, 1 - angle ** 2 / 6, np.sin(angle) / np.maximum(angle, eps))
    b = np.where(small, 0.5 - angle ** 2 / 24, (1 - np.cos(angle)) / np.maximum(angle ** 2, eps))
    return np.eye(3) + a * K + b * (K @ K)


def matrix_to_axis_angle(rot_mat: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Logarithm map of SO(3): rotation matrix to rotation vector

    Args:
        rot_mat (np.ndarray): [..., 3, 3] rotation matrices

    Returns:
        np.ndarray: [..., 3] rotation vectors with angle in [0, pi]
    """
    rot_mat = np.asarray(rot_mat, dtype=float)
    cos = np.clip((np.trace(rot_mat, axis1=-2, axis2=-1) - 1) / 2, -1, 1)
    angle = np.arccos(cos)
    vee = 0.5 * np.stack([
        rot_mat[..., 2, 1] - rot_mat[..., 1, 2],
        rot_mat[..., 0, 2] - rot_mat[..., 2, 0],
        rot_mat[..., 1, 0] - rot_mat[..., 0, 1],
    ], axis=-1)
    small = angle < 1e-6
    scale = np.where(small, 1 + angle ** 2 / 6, angle / np.maximum(np.sin(angle), eps))
    axis_angle = scale[..., None] * vee
    near_pi = angle > np.pi - 1e-3
    if np.any(near_pi):
        axis_angle[near_pi] = Rotation.from_matrix(rot_mat[near_pi]).as_rotvec()
    return axis_angle


def euler_axis_angle_rotation(axis: Literal['X', 'Y', 'Z'], angle: np.ndarray) -> np.ndarray:
    """Elementary rotation about a body axis

    Args:
        axis (str): 'X' (roll), 'Y' (pitch) or 'Z' (yaw)
        angle (np.ndarray): [...] angles in radians

    Returns:
        np.ndarray: [..., 3, 3] rotation matrices
    """
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    i = 'XYZ'.index(axis)
    j, k = (i + 1) % 3, (i + 2) % 3
    R = np.zeros(angle.shape + (3, 3))
    R[..., i, i] = 1
    R[..., j, j] = c
    R[..., k, k] = c
    R[..., j, k] = -s
    R[..., k, j] = s
    return R


def euler_angles_to_matrix(euler_angles: np.ndarray) -> np.ndarray:
    """
    Body-to-world rotation from (roll, pitch, yaw), applied roll first: R = Rz(yaw) Ry(pitch) Rx(roll).

    Args:
        euler_angles: [..., 3] roll, pitch, yaw in radians

    Returns:
        [..., 3, 3] rotation matrices
    """
    euler_angles = np.asarray(euler_angles, dtype=float)
    if euler_angles.shape[-1] != 3:
        raise ValueError("Invalid input euler angles.")
    Rx = euler_axis_angle_rotation('X', euler_angles[..., 0])
    Ry = euler_axis_angle_rotation('Y', euler_angles[..., 1])
    Rz = euler_axis_angle_rotation('Z', euler_angles[..., 2])
    return Rz @ Ry @ Rx


def matrix_to_euler_angles(rot_mat: np.ndarray) -> np.ndarray:
    "Inverse of `euler_angles_to_matrix`, returns [..., 3] (roll, pitch, yaw)"
    rot_mat = np.asarray(rot_mat, dtype=float)
    flat = rot_mat.reshape(-1, 3, 3)
    # extrinsic xyz == intrinsic ZYX
    angles = Rotation.from_matrix(flat).as_euler('xyz')
    return angles.reshape(*rot_mat.shape[:-2], 3)


def wrap_angle(angle: np.ndarray) -> np.ndarray:
    "Wrap angles to (-pi, pi]"
    angle = np.asarray(angle, dtype=float)
    wrapped = np.mod(angle + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def lerp(x1: np.ndarray, x2: np.ndarray, t: np.ndarray) -> np.ndarray:
    "Blend `[..., d]` endpoints by fraction `t` of shape `[...]`; t outside [0, 1] extrapolates"
    return x1 + np.asarray(t)[..., None] * (x2 - x1)


def piecewise_lerp(x: np.ndarray, t: np.ndarray, s: np.ndarray, extrapolation_mode: Literal['constant', 'linear'] = 'constant') -> np.ndarray:
    """Resample a time series at new timestamps by linear interpolation.

    ### Parameters:
    - `x`: (n, d) samples
    - `t`: (n,) strictly increasing sample times
    - `s`: (m,) query times
    - `extrapolation_mode`: outside [t[0], t[-1]], 'constant' holds the end sample and 'linear' continues the end segment

    ### Returns:
    - (m, d) resampled values
    """
    x, t, s = np.asarray(x, dtype=float), np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    n = len(t)
    if n == 1:
        return np.repeat(x[:1], len(s), axis=0)
    if extrapolation_mode not in ('constant', 'linear'):
        raise ValueError(f'Invalid extrapolation_mode: {extrapolation_mode}')
    # segment index k covers [t[k], t[k + 1]]
    k = np.clip(np.searchsorted(t, s, side='right') - 1, 0, n - 2)
    frac = (s - t[k]) / np.maximum(t[k + 1] - t[k], 1e-12)
    if extrapolation_mode == 'constant':
        frac = np.clip(frac, 0, 1)
    return lerp(x[k], x[k + 1], frac)
