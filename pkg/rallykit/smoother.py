import logging
from dataclasses import dataclass, field
from typing import *

import numpy as np
import scipy.linalg

from ._helpers import InsufficientDataError, NumericalError
from .transforms import axis_angle_to_matrix, matrix_to_axis_angle, matrix_to_euler_angles, euler_angles_to_matrix, skew_symmetric, piecewise_lerp


__all__ = [
    'GRAVITY_VECTOR',
    'SmootherConfig',
    'PreintegratedImu',
    'GraphValues',
    'FactorGraph',
    'OptimizeResult',
    'StateStream',
    'preintegrate_imu',
    'build_graph',
    'initial_values',
    'optimize',
    'interpolate_state',
]

logger = logging.getLogger(__name__)

GRAVITY_VECTOR = np.array([0.0, 0.0, -9.81])
KIND_DIMS = {'R': 3, 'p': 3, 'v': 3, 'b': 6}


@dataclass(frozen=True)
class SmootherConfig:
    """Factor-graph settings.

    IMU noise is per sample, bias random walks per sqrt(s). Biases are
    ordered (accelerometer xyz, gyroscope xyz). `gps_compensation` adds
    v_i * dt to the node position of a fix taken dt after the node; None
    enables it exactly when IMU factors are used.
    """
    node_rate: float = 10.0
    use_imu: bool = True
    use_bias_chain: bool = True
    gps_sigma: Tuple[float, float, float] = (0.02, 0.02, 0.02)
    gps_compensation: Optional[bool] = None
    accel_sigma: float = 0.05
    gyro_sigma: float = 0.005
    accel_bias_walk: float = 1e-3
    gyro_bias_walk: float = 1e-4
    prior_position_sigma: float = 0.02
    prior_rotation_sigma: Tuple[float, float, float] = (0.05, 0.05, 0.5)
    prior_velocity_sigma: float = 0.5
    prior_accel_bias_sigma: float = 0.1
    prior_gyro_bias_sigma: float = 0.01
    max_iterations: int = 100
    tolerance: float = 1e-9
    initial_damping: float = 1e-5

    def __post_init__(self):
        if not self.node_rate > 0:
            raise ValueError(f'node_rate must be positive, got {self.node_rate}')
        for name in ('gps_sigma', 'prior_rotation_sigma'):
            if not all(s > 0 for s in getattr(self, name)):
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        for name in ('accel_sigma', 'gyro_sigma', 'accel_bias_walk', 'gyro_bias_walk', 'prior_position_sigma',
                     'prior_velocity_sigma', 'prior_accel_bias_sigma', 'prior_gyro_bias_sigma'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')


@dataclass
class PreintegratedImu:
    """Relative motion between two node times from the IMU samples in between.

    The deltas are expressed in the frame of the first node and exclude
    gravity; `cov` is ordered (rotation, velocity, position). The bias
    Jacobians give the first-order change of the deltas with the bias
    around `bias`.
    """
    delta_t: float
    delta_R: np.ndarray
    delta_v: np.ndarray
    delta_p: np.ndarray
    cov: np.ndarray
    bias: np.ndarray
    d_R_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_v_d_ba: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_v_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_p_d_ba: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_p_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def corrected(self, bias: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        "Deltas re-evaluated for another bias to first order"
        db = np.asarray(bias, dtype=float) - self.bias
        dba, dbg = db[..., :3], db[..., 3:]
        delta_R = self.delta_R @ axis_angle_to_matrix(dbg @ self.d_R_d_bg.T)
        delta_v = self.delta_v + dba @ self.d_v_d_ba.T + dbg @ self.d_v_d_bg.T
        delta_p = self.delta_p + dba @ self.d_p_d_ba.T + dbg @ self.d_p_d_bg.T
        return delta_R, delta_v, delta_p

    def compensated(self, R_i: np.ndarray = np.eye(3)) -> Tuple[np.ndarray, np.ndarray]:
        "World-frame velocity and position change including gravity: (R_i dv + g dt, R_i dp + g dt^2 / 2)"
        return (
            R_i @ self.delta_v + GRAVITY_VECTOR * self.delta_t,
            R_i @ self.delta_p + 0.5 * GRAVITY_VECTOR * self.delta_t ** 2,
        )

    def predict(self, R_i: np.ndarray, p_i: np.ndarray, v_i: np.ndarray, bias: np.ndarray = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        "(R_j, p_j, v_j) reached from node state (R_i, p_i, v_i)"
        delta_R, delta_v, delta_p = self.corrected(self.bias if bias is None else bias)
        dt = self.delta_t
        return (
            R_i @ delta_R,
            p_i + v_i * dt + 0.5 * GRAVITY_VECTOR * dt ** 2 + R_i @ delta_p,
            v_i + GRAVITY_VECTOR * dt + R_i @ delta_v,
        )


def _integrate(t: np.ndarray, omega: np.ndarray, accel: np.ndarray, bias: np.ndarray, gyro_sigma: float, accel_sigma: float, history: bool = False):
    "Midpoint integration of the IMU deltas, covariance and bias Jacobians; optionally the deltas at every sample"
    I3 = np.eye(3)
    delta_R, delta_v, delta_p = I3.copy(), np.zeros(3), np.zeros(3)
    cov = np.zeros((9, 9))
    d_R_d_bg, d_v_d_ba, d_v_d_bg, d_p_d_ba, d_p_d_bg = (np.zeros((3, 3)) for _ in range(5))
    noise = np.diag([gyro_sigma ** 2] * 3 + [accel_sigma ** 2] * 3)
    steps = [(delta_R, delta_v, delta_p)] if history else None
    for k in range(len(t) - 1):
        dt = t[k + 1] - t[k]
        w = (omega[k] + omega[k + 1]) / 2 - bias[3:]
        a = (accel[k] + accel[k + 1]) / 2 - bias[:3]
        increment = axis_angle_to_matrix(w * dt)
        R_mid = delta_R @ axis_angle_to_matrix(w * dt / 2)
        Ra_skew = R_mid @ skew_symmetric(a)

        A = np.eye(9)
        A[0:3, 0:3] = increment.T
        A[3:6, 0:3] = -Ra_skew * dt
        A[6:9, 0:3] = -0.5 * Ra_skew * dt ** 2
        A[6:9, 3:6] = I3 * dt
        B = np.zeros((9, 6))
        B[0:3, 0:3] = I3 * dt
        B[3:6, 3:6] = R_mid * dt
        B[6:9, 3:6] = 0.5 * R_mid * dt ** 2
        cov = A @ cov @ A.T + B @ noise @ B.T

        d_p_d_ba = d_p_d_ba + d_v_d_ba * dt - 0.5 * R_mid * dt ** 2
        d_p_d_bg = d_p_d_bg + d_v_d_bg * dt - 0.5 * Ra_skew @ d_R_d_bg * dt ** 2
        d_v_d_ba = d_v_d_ba - R_mid * dt
        d_v_d_bg = d_v_d_bg - Ra_skew @ d_R_d_bg * dt
        d_R_d_bg = increment.T @ d_R_d_bg - I3 * dt

        a_world = R_mid @ a
        delta_p = delta_p + delta_v * dt + 0.5 * a_world * dt ** 2
        delta_v = delta_v + a_world * dt
        delta_R = delta_R @ increment
        if history:
            steps.append((delta_R, delta_v, delta_p))
    result = PreintegratedImu(
        float(t[-1] - t[0]), delta_R, delta_v, delta_p, cov, np.asarray(bias, dtype=float).copy(),
        d_R_d_bg, d_v_d_ba, d_v_d_bg, d_p_d_ba, d_p_d_bg,
    )
    return (result, steps) if history else result


def _check_gaps(t: np.ndarray, nominal_period: float = None):
    if len(t) < 2:
        return
    diffs = np.diff(t)
    period = nominal_period if nominal_period is not None else float(np.median(diffs))
    if np.any(diffs > 2 * period + 1e-9):
        k = int(np.argmax(diffs > 2 * period + 1e-9))
        raise InsufficientDataError(f'IMU gap of {diffs[k]:.4f} s at t = {t[k]:.4f} s exceeds two sample periods ({period:.4f} s)')


def preintegrate_imu(
    t: np.ndarray,
    omega: np.ndarray,
    accel: np.ndarray,
    bias: np.ndarray = None,
    gyro_sigma: float = 0.0,
    accel_sigma: float = 0.0,
    nominal_period: float = None,
) -> PreintegratedImu:
    """Preintegrate IMU samples spanning one node interval.

    Args:
        t (np.ndarray): [m] sample times, nondecreasing
        omega (np.ndarray): [m, 3] angular rate (rad/s)
        accel (np.ndarray): [m, 3] specific force (m/s^2)
        bias (np.ndarray): [6] accelerometer and gyroscope bias, default zero
        gyro_sigma (float): gyroscope white noise per sample
        accel_sigma (float): accelerometer white noise per sample
        nominal_period (float): sample period for the gap check, default the median spacing

    Returns:
        PreintegratedImu
    """
    t = np.asarray(t, dtype=float)
    omega, accel = np.asarray(omega, dtype=float), np.asarray(accel, dtype=float)
    assert t.ndim == 1 and omega.shape == (len(t), 3) and accel.shape == (len(t), 3), 'expected [m] times with [m, 3] rates and forces'
    assert np.all(np.diff(t) >= 0), 'IMU samples must be time-ordered'
    if len(t) == 0:
        raise InsufficientDataError('no IMU samples in the interval')
    _check_gaps(t, nominal_period)
    bias = np.zeros(6) if bias is None else np.asarray(bias, dtype=float)
    return _integrate(t, omega, accel, bias, gyro_sigma, accel_sigma)


def _interval_samples(imu_t: np.ndarray, imu_values: np.ndarray, t_start: float, t_end: float) -> Tuple[np.ndarray, np.ndarray]:
    "IMU samples strictly inside (t_start, t_end) plus values interpolated at both ends"
    inside = (imu_t > t_start) & (imu_t < t_end)
    ends = np.stack([np.interp([t_start, t_end], imu_t, imu_values[:, i]) for i in range(imu_values.shape[1])], axis=-1)
    t = np.concatenate([[t_start], imu_t[inside], [t_end]])
    values = np.concatenate([ends[:1], imu_values[inside], ends[1:]], axis=0)
    return t, values


@dataclass
class GraphValues:
    "Node-ordered variable assignment: orientation, position, velocity and IMU bias per node"
    R: np.ndarray   # [n, 3, 3]
    p: np.ndarray   # [n, 3]
    v: np.ndarray   # [n, 3]
    b: np.ndarray   # [n, 6]

    def copy(self) -> 'GraphValues':
        return GraphValues(self.R.copy(), self.p.copy(), self.v.copy(), self.b.copy())

    def get(self, kind: str) -> np.ndarray:
        return getattr(self, kind)

    def retract(self, delta: np.ndarray, kinds: Sequence[str]) -> 'GraphValues':
        "Apply a [n, D] tangent increment laid out as `kinds`; R_i <- R_i Exp(d_theta), others additive"
        out = self.copy()
        offset = 0
        for kind in kinds:
            d = delta[:, offset:offset + KIND_DIMS[kind]]
            if kind == 'R':
                out.R = self.R @ axis_angle_to_matrix(d)
            else:
                setattr(out, kind, self.get(kind) + d)
            offset += KIND_DIMS[kind]
        return out


def _numeric_jacobian(fn: Callable[..., np.ndarray], args: List[np.ndarray], rotation: List[bool], eps: float = 1e-6) -> List[np.ndarray]:
    "Central-difference Jacobian blocks [F, m, dim] of a batched residual, rotations perturbed on the right"
    blocks = []
    for index, (arg, is_rotation) in enumerate(zip(args, rotation)):
        dim = 3 if is_rotation else arg.shape[-1]
        columns = []
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = eps
            plus, minus = list(args), list(args)
            if is_rotation:
                plus[index] = arg @ axis_angle_to_matrix(e)
                minus[index] = arg @ axis_angle_to_matrix(-e)
            else:
                plus[index], minus[index] = arg + e, arg - e
            columns.append((fn(*plus) - fn(*minus)) / (2 * eps))
        blocks.append(np.stack(columns, axis=-1))
    return blocks


class Linearization(NamedTuple):
    name: str
    residual: np.ndarray    # [F, m] whitened
    columns: np.ndarray     # [F, L] global tangent indices
    jacobian: np.ndarray    # [F, m, L]


@dataclass
class FactorGraph:
    """Node-ordered factor graph over (X, V, B) triples.

    Node i carries the variable kinds listed in `kinds`: 'R' and 'p' form the
    pose X_i, 'v' is V_i and 'b' is B_i. Factors are stored as batches of
    arrays; every factor touches at most two consecutive nodes.
    """
    node_times: np.ndarray
    origin: np.ndarray
    kinds: Tuple[str, ...]
    config: SmootherConfig
    gps_node: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    gps_z: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    gps_dt: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gps_sigma: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    gps_compensation: bool = False
    imu: List[PreintegratedImu] = field(default_factory=list)
    priors: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        self._setup_imu()

    @property
    def n_nodes(self) -> int:
        return len(self.node_times)

    @property
    def n_variables(self) -> int:
        groups = {'R': 'X', 'p': 'X', 'v': 'V', 'b': 'B'}
        return self.n_nodes * len({groups[kind] for kind in self.kinds})

    @property
    def n_gps(self) -> int:
        return len(self.gps_node)

    @property
    def n_imu(self) -> int:
        return len(self.imu)

    @property
    def n_bias(self) -> int:
        return self.n_nodes - 1 if 'b' in self.kinds else 0

    @property
    def block_size(self) -> int:
        return sum(KIND_DIMS[kind] for kind in self.kinds)

    def _offset(self, kind: str) -> int:
        offset = 0
        for k in self.kinds:
            if k == kind:
                return offset
            offset += KIND_DIMS[k]
        raise KeyError(kind)

    def _columns(self, nodes: np.ndarray, kind: str) -> np.ndarray:
        return np.asarray(nodes)[:, None] * self.block_size + self._offset(kind) + np.arange(KIND_DIMS[kind])

    def _setup_imu(self):
        F = len(self.imu)
        if F == 0:
            return
        self._imu_dt = np.array([f.delta_t for f in self.imu])
        self._imu_R = np.stack([f.delta_R for f in self.imu])
        self._imu_v = np.stack([f.delta_v for f in self.imu])
        self._imu_p = np.stack([f.delta_p for f in self.imu])
        self._imu_bias = np.stack([f.bias for f in self.imu])
        self._imu_jac = {name: np.stack([getattr(f, name) for f in self.imu]) for name in ('d_R_d_bg', 'd_v_d_ba', 'd_v_d_bg', 'd_p_d_ba', 'd_p_d_bg')}
        L = np.linalg.cholesky(np.stack([f.cov for f in self.imu]) + 1e-12 * np.eye(9))
        self._imu_sqrt_info = np.linalg.inv(L)

    def _imu_residual(self, R_i, p_i, v_i, b_i, R_j, p_j, v_j) -> np.ndarray:
        dt = self._imu_dt[:, None]
        db = b_i - self._imu_bias
        dba, dbg = db[:, :3, None], db[:, 3:, None]
        J = self._imu_jac
        delta_R = self._imu_R @ axis_angle_to_matrix((J['d_R_d_bg'] @ dbg)[..., 0])
        delta_v = self._imu_v + (J['d_v_d_ba'] @ dba + J['d_v_d_bg'] @ dbg)[..., 0]
        delta_p = self._imu_p + (J['d_p_d_ba'] @ dba + J['d_p_d_bg'] @ dbg)[..., 0]
        R_iT = np.swapaxes(R_i, -1, -2)
        r_R = matrix_to_axis_angle(np.swapaxes(delta_R, -1, -2) @ R_iT @ R_j)
        r_v = (R_iT @ (v_j - v_i - GRAVITY_VECTOR * dt)[..., None])[..., 0] - delta_v
        r_p = (R_iT @ (p_j - p_i - v_i * dt - 0.5 * GRAVITY_VECTOR * dt ** 2)[..., None])[..., 0] - delta_p
        r = np.concatenate([r_R, r_v, r_p], axis=-1)
        return (self._imu_sqrt_info @ r[..., None])[..., 0]

    def linearize(self, values: GraphValues, jacobians: bool = True) -> List[Linearization]:
        "Whitened residuals of every factor batch, with Jacobians with respect to the tangent increments"
        out = []
        nodes0 = np.zeros(1, dtype=int)

        for kind, (mean, sigma) in self.priors.items():
            if kind == 'R':
                prior_T = mean.T
                fn = lambda R: matrix_to_axis_angle(prior_T @ R) / sigma
                r = fn(values.R[:1])
                J = _numeric_jacobian(fn, [values.R[:1]], [True])[0] if jacobians else None
            else:
                r = (values.get(kind)[:1] - mean) / sigma
                J = np.diag(1 / sigma)[None] if jacobians else None
            out.append(Linearization(f'prior_{kind}', r, self._columns(nodes0, kind), J))

        if self.n_gps:
            use_v = self.gps_compensation and 'v' in self.kinds
            offset = self.gps_dt[:, None] * values.v[self.gps_node] if use_v else 0.0
            r = (values.p[self.gps_node] + offset - self.gps_z) / self.gps_sigma
            columns = self._columns(self.gps_node, 'p')
            J = None
            if jacobians:
                J = np.eye(3)[None] / self.gps_sigma[:, :, None]
                if use_v:
                    columns = np.concatenate([columns, self._columns(self.gps_node, 'v')], axis=-1)
                    J = np.concatenate([J, J * self.gps_dt[:, None, None]], axis=-1)
            out.append(Linearization('gps', r, columns, J))

        if self.n_bias:
            i = np.arange(self.n_nodes - 1)
            dt = np.diff(self.node_times)[:, None]
            walk = np.array([self.config.accel_bias_walk] * 3 + [self.config.gyro_bias_walk] * 3)
            scale = walk * np.sqrt(dt)
            r = (values.b[i + 1] - values.b[i]) / scale
            J = None
            if jacobians:
                J = np.concatenate([-np.eye(6)[None] / scale[:, :, None], np.eye(6)[None] / scale[:, :, None]], axis=-1)
            out.append(Linearization('bias', r, np.concatenate([self._columns(i, 'b'), self._columns(i + 1, 'b')], axis=-1), J))

        if self.n_imu:
            i = np.arange(self.n_imu)
            j = i + 1
            args = [values.R[i], values.p[i], values.v[i], values.b[i], values.R[j], values.p[j], values.v[j]]
            r = self._imu_residual(*args)
            columns = np.concatenate([
                self._columns(i, 'R'), self._columns(i, 'p'), self._columns(i, 'v'), self._columns(i, 'b'),
                self._columns(j, 'R'), self._columns(j, 'p'), self._columns(j, 'v'),
            ], axis=-1)
            J = None
            if jacobians:
                J = np.concatenate(_numeric_jacobian(self._imu_residual, args, [True, False, False, False, True, False, False]), axis=-1)
            out.append(Linearization('imu', r, columns, J))
        return out

    def factor_costs(self, values: GraphValues) -> Dict[str, np.ndarray]:
        "Per-factor costs 0.5 * ||r||^2, grouped by factor type"
        return {lin.name: 0.5 * np.sum(lin.residual ** 2, axis=-1) for lin in self.linearize(values, jacobians=False)}

    def cost(self, values: GraphValues) -> float:
        return float(sum(c.sum() for c in self.factor_costs(values).values()))

    def normal_equations(self, values: GraphValues) -> Tuple[np.ndarray, np.ndarray, float]:
        """Banded upper-form J^T J, gradient J^T r and cost at `values`.

        Returns:
            (ab [u + 1, N] with u = 2D - 1, g [N], cost)
        """
        D = self.block_size
        N = self.n_nodes * D
        u = 2 * D - 1
        ab = np.zeros((u + 1, N))
        g = np.zeros(N)
        cost = 0.0
        for lin in self.linearize(values):
            cost += 0.5 * float(np.sum(lin.residual ** 2))
            np.add.at(g, lin.columns, np.einsum('fm,fml->fl', lin.residual, lin.jacobian))
            H = np.einsum('fma,fmb->fab', lin.jacobian, lin.jacobian)
            rows = np.broadcast_to(lin.columns[:, :, None], H.shape)
            cols = np.broadcast_to(lin.columns[:, None, :], H.shape)
            upper = rows <= cols
            np.add.at(ab, (u + rows[upper] - cols[upper], cols[upper]), H[upper])
        return ab, g, cost


def build_graph(gps, imu=None, cfg: SmootherConfig = SmootherConfig(), initial: GraphValues = None) -> Tuple[FactorGraph, GraphValues]:
    """Factor graph with one node per 1 / node_rate seconds from the first GPS fix.

    The first fix defines the origin of the local frame. Each fix is attached
    to its nearest node (ties go to the later node). With an IMU stream,
    consecutive nodes are joined by preintegrated IMU factors and the biases
    by a random-walk chain; priors anchor the first node.

    Args:
        gps: stream with `t` [N] and `values` [N, 3]
        imu: stream with `t` [M] and `values` [M, 6] (specific force, angular rate), or None for a GPS-only graph
        cfg (SmootherConfig): settings
        initial (GraphValues, optional): initial assignment, default from `initial_values`

    Returns:
        (FactorGraph, initial GraphValues)
    """
    gps_t = np.asarray(gps.t, dtype=float)
    gps_z = np.asarray(gps.values, dtype=float)
    if len(gps_t) == 0:
        raise InsufficientDataError('empty GPS stream, nothing to build a graph from')
    order = np.argsort(gps_t, kind='stable')
    gps_t, gps_z = gps_t[order], gps_z[order]
    origin = gps_z[0].copy()
    t0 = gps_t[0]
    n_nodes = int(np.floor((gps_t[-1] - t0) * cfg.node_rate + 1e-9)) + 1
    node_times = t0 + np.arange(n_nodes) / cfg.node_rate
    node = np.clip(np.floor((gps_t - t0) * cfg.node_rate + 0.5 + 1e-9).astype(int), 0, n_nodes - 1)

    use_imu = cfg.use_imu and imu is not None and n_nodes > 1
    if use_imu:
        kinds = ('R', 'p', 'v', 'b')
    elif cfg.use_bias_chain and imu is not None:
        kinds = ('p', 'b')
    else:
        kinds = ('p',)
    compensation = use_imu if cfg.gps_compensation is None else (cfg.gps_compensation and 'v' in kinds)

    factors = []
    if use_imu:
        imu_t = np.asarray(imu.t, dtype=float)
        imu_values = np.asarray(imu.values, dtype=float)
        if len(imu_t) < 2 or imu_t[0] > node_times[0] + 1e-9 or imu_t[-1] < node_times[-1] - 1e-9:
            raise InsufficientDataError(f'IMU stream does not cover the node times {node_times[0]:.3f} to {node_times[-1]:.3f} s')
        period = float(np.median(np.diff(imu_t)))
        for k in range(n_nodes - 1):
            t, values = _interval_samples(imu_t, imu_values, node_times[k], node_times[k + 1])
            _check_gaps(t, period)
            factors.append(_integrate(t, values[:, 3:], values[:, :3], np.zeros(6), cfg.gyro_sigma, cfg.accel_sigma))

    graph = FactorGraph(
        node_times=node_times, origin=origin, kinds=kinds, config=cfg,
        gps_node=node, gps_z=gps_z - origin, gps_dt=gps_t - node_times[node],
        gps_sigma=np.tile(np.asarray(cfg.gps_sigma, dtype=float), (len(gps_t), 1)),
        gps_compensation=compensation, imu=factors,
    )
    values = initial if initial is not None else initial_values(graph)
    graph.priors['p'] = (np.zeros(3), np.full(3, cfg.prior_position_sigma))
    if 'R' in kinds:
        graph.priors['R'] = (values.R[0].copy(), np.asarray(cfg.prior_rotation_sigma, dtype=float))
    if 'v' in kinds:
        graph.priors['v'] = (values.v[0].copy(), np.full(3, cfg.prior_velocity_sigma))
    if 'b' in kinds:
        graph.priors['b'] = (np.zeros(6), np.array([cfg.prior_accel_bias_sigma] * 3 + [cfg.prior_gyro_bias_sigma] * 3))
    logger.info(f'graph: {graph.n_nodes} nodes, {graph.n_gps} GPS, {graph.n_imu} IMU and {graph.n_bias} bias factors')
    return graph, values


def initial_values(graph: FactorGraph) -> GraphValues:
    "GPS positions interpolated at the node times, velocity by finite differences, yaw along the velocity, zero bias"
    t_fix = graph.node_times[graph.gps_node] + graph.gps_dt
    order = np.argsort(t_fix, kind='stable')
    p = piecewise_lerp(graph.gps_z[order], t_fix[order], graph.node_times)
    n = graph.n_nodes
    v = np.gradient(p, graph.node_times, axis=0) if n > 1 else np.zeros((n, 3))
    yaw = np.zeros(n)
    moving = np.hypot(v[:, 0], v[:, 1]) > 0.1
    yaw[moving] = np.arctan2(v[moving, 1], v[moving, 0])
    if moving.any():
        # hold the last valid heading through stops
        idx = np.where(moving, np.arange(n), 0)
        np.maximum.accumulate(idx, out=idx)
        first = int(np.argmax(moving))
        idx[:first] = first
        yaw = yaw[idx]
    R = euler_angles_to_matrix(np.stack([np.zeros(n), np.zeros(n), yaw], axis=-1))
    return GraphValues(R=R, p=p, v=v, b=np.zeros((n, 6)))


class OptimizeResult(NamedTuple):
    values: GraphValues
    cost: float
    initial_cost: float
    iterations: int
    converged: bool


def optimize(graph: FactorGraph, initial: GraphValues, max_iterations: int = None, tolerance: float = None) -> OptimizeResult:
    """Levenberg-Marquardt on the node-ordered banded normal equations.

    Stops when an accepted step lowers the cost by less than `tolerance`
    relative, or after `max_iterations`.

    Args:
        graph (FactorGraph): the graph
        initial (GraphValues): initial assignment
        max_iterations (int): default from the graph config
        tolerance (float): default from the graph config

    Returns:
        OptimizeResult
    """
    max_iterations = graph.config.max_iterations if max_iterations is None else max_iterations
    tolerance = graph.config.tolerance if tolerance is None else tolerance
    D, n = graph.block_size, graph.n_nodes
    u = 2 * D - 1
    values = initial.copy()
    damping = graph.config.initial_damping
    ab, g, cost = graph.normal_equations(values)
    initial_cost = cost
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        while True:
            damped = ab.copy()
            damped[u] = ab[u] * (1 + damping) + 1e-12
            try:
                delta = scipy.linalg.solveh_banded(damped, -g, lower=False)
            except np.linalg.LinAlgError:
                damping *= 10
                if damping > 1e10:
                    raise NumericalError(f'normal equations not positive definite at cost {cost:.6g}')
                continue
            candidate = values.retract(delta.reshape(n, D), graph.kinds)
            new_cost = graph.cost(candidate)
            if new_cost <= cost:
                break
            if abs(new_cost - cost) <= tolerance * cost + 1e-24:
                new_cost, candidate = cost, values
                break
            damping *= 10
            if damping > 1e10:
                raise NumericalError(
                    f'Levenberg-Marquardt cannot decrease the cost {cost:.6g} '
                    f'(iteration {iteration}, gradient norm {np.linalg.norm(g):.3g})'
                )
        decrease = cost - new_cost
        logger.debug(f'iteration {iteration}: cost {new_cost:.6g}, damping {damping:.1e}')
        values = candidate
        damping = max(damping / 10, 1e-12)
        if decrease <= tolerance * cost + 1e-24:
            cost = new_cost
            converged = True
            break
        ab, g, cost = graph.normal_equations(values)
    logger.info(f'optimized {graph.n_nodes} nodes in {iteration} iterations: cost {initial_cost:.6g} -> {cost:.6g}')
    return OptimizeResult(values, cost, initial_cost, iteration, converged)


class StateStream(NamedTuple):
    t: np.ndarray           # [M]
    position: np.ndarray    # [M, 3] world frame
    velocity: np.ndarray    # [M, 3]
    euler: np.ndarray       # [M, 3] roll, pitch, yaw


def interpolate_state(graph: FactorGraph, values: GraphValues, imu=None) -> StateStream:
    """High-rate states: IMU integrated forward from each node, reset at every node time.

    Output times are the IMU sample times between the first and last node;
    at node times the output equals the node values. Graphs without
    orientation interpolate node positions linearly.

    Args:
        graph (FactorGraph): the graph
        values (GraphValues): optimized assignment
        imu: stream with `t` [M] and `values` [M, 6]

    Returns:
        StateStream in world coordinates (local frame plus origin)
    """
    node_times = graph.node_times
    if imu is None or 'R' not in graph.kinds:
        t = node_times if imu is None else np.asarray(imu.t, dtype=float)
        t = t[(t >= node_times[0]) & (t <= node_times[-1])]
        position = piecewise_lerp(values.p, node_times, t)
        velocity = piecewise_lerp(values.v, node_times, t) if 'v' in graph.kinds else np.gradient(position, t, axis=0) if len(t) > 1 else np.zeros_like(position)
        euler = np.zeros_like(position)
        return StateStream(t, position + graph.origin, velocity, euler)

    imu_t = np.asarray(imu.t, dtype=float)
    imu_values = np.asarray(imu.values, dtype=float)
    times, positions, velocities, rotations = [], [], [], []
    for k in range(graph.n_nodes):
        t_end = node_times[k + 1] if k + 1 < graph.n_nodes else node_times[k]
        out = imu_t[(imu_t >= node_times[k]) & ((imu_t < t_end) if k + 1 < graph.n_nodes else (imu_t <= t_end))]
        if len(out) == 0 or out[0] != node_times[k]:
            out = np.concatenate([[node_times[k]], out[out > node_times[k]]])
        t, samples = _interval_samples(imu_t, imu_values, node_times[k], max(out[-1], node_times[k]))
        _, steps = _integrate(t, samples[:, 3:], samples[:, :3], values.b[k], 0.0, 0.0, history=True)
        step_times = t
        R_k, p_k, v_k = values.R[k], values.p[k], values.v[k]
        for tau in out:
            m = int(np.searchsorted(step_times, tau, side='left'))
            m = min(m, len(steps) - 1)
            delta_R, delta_v, delta_p = steps[m]
            dt = tau - node_times[k]
            times.append(tau)
            rotations.append(R_k @ delta_R)
            velocities.append(v_k + GRAVITY_VECTOR * dt + R_k @ delta_v)
            positions.append(p_k + v_k * dt + 0.5 * GRAVITY_VECTOR * dt ** 2 + R_k @ delta_p)
    position = np.stack(positions) + graph.origin
    return StateStream(np.array(times), position, np.stack(velocities), matrix_to_euler_angles(np.stack(rotations)))
