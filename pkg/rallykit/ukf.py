import logging
from collections import deque
from dataclasses import dataclass, fields, replace
from typing import *

import numpy as np
import scipy.linalg

from ._helpers import DivergenceError, InsufficientDataError, NumericalError, no_warnings
from .tire import MagicFormulaParams, MF_FIELDS
from .vehicle import VehicleParams, integrate_rk4


__all__ = [
    'UtParams',
    'SigmaPointSet',
    'Belief',
    'NoiseStatistics',
    'AugmentedState',
    'ParameterSpec',
    'NoiseSampleWindow',
    'FilterModel',
    'JointStateUKF',
    'DEFAULT_PARAMETER_BOUNDS',
    'nearest_positive_definite',
    'sigma_points',
    'ukf_predict',
    'ukf_update',
    'joint_state_augment',
    'vehicle_process_model',
    'state_observation',
    'estimate_observation_noise',
    'estimate_process_noise',
    'alm_ukf_step',
    'observability_rank',
    'vehicle_joint_filter',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UtParams:
    alpha: float = 1e-1
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f'alpha must lie in (0, 1], got {self.alpha}')

    def lambda_(self, L: int) -> float:
        return self.alpha ** 2 * (L + self.kappa) - L


class SigmaPointSet(NamedTuple):
    points: np.ndarray      # [2L+1, L]
    wm: np.ndarray          # [2L+1]
    wc: np.ndarray          # [2L+1]


@dataclass
class Belief:
    mean: np.ndarray
    cov: np.ndarray

    def copy(self) -> 'Belief':
        return Belief(self.mean.copy(), self.cov.copy())


@dataclass
class NoiseStatistics:
    """Noise hyperparameters: process mean/covariance (q, Q) and observation mean/covariance (r, R)"""
    q: np.ndarray
    Q: np.ndarray
    r: np.ndarray
    R: np.ndarray

    @classmethod
    def from_sigmas(cls, process_sigma: np.ndarray, observation_sigma: np.ndarray) -> 'NoiseStatistics':
        process_sigma = np.asarray(process_sigma, dtype=float)
        observation_sigma = np.asarray(observation_sigma, dtype=float)
        return cls(
            q=np.zeros(len(process_sigma)), Q=np.diag(process_sigma ** 2),
            r=np.zeros(len(observation_sigma)), R=np.diag(observation_sigma ** 2),
        )

    def copy(self) -> 'NoiseStatistics':
        return NoiseStatistics(self.q.copy(), self.Q.copy(), self.r.copy(), self.R.copy())


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return (M + np.swapaxes(M, -1, -2)) / 2


def nearest_positive_definite(M: np.ndarray, eps: float = 1e-9, return_repaired: bool = False) -> Union[np.ndarray, Tuple[np.ndarray, bool]]:
    """Frobenius-nearest symmetric matrix with eigenvalues at least `eps`.

    Args:
        M (np.ndarray): [..., n, n] square matrices
        eps (float): eigenvalue floor
        return_repaired (bool): also return whether any eigenvalue was clipped

    Returns:
        np.ndarray: [..., n, n] symmetric positive definite matrices
    """
    M = np.asarray(M, dtype=float)
    assert M.shape[-1] == M.shape[-2], 'matrix must be square'
    sym = _symmetrize(M)
    w, V = np.linalg.eigh(sym)
    repaired = bool(np.any(w < eps))
    if repaired:
        out = _symmetrize((V * np.maximum(w, eps)[..., None, :]) @ np.swapaxes(V, -1, -2))
    else:
        out = sym
    if return_repaired:
        return out, repaired
    return out


def sigma_points(mean: np.ndarray, cov: np.ndarray, ut: UtParams = UtParams()) -> SigmaPointSet:
    """Unscented-transform sigma points and weights.

    Args:
        mean (np.ndarray): [L] mean
        cov (np.ndarray): [L, L] covariance, symmetric positive definite
        ut (UtParams): scaling parameters

    Returns:
        SigmaPointSet: 2L+1 points (mean first, then +columns, then -columns) with mean and covariance weights
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    L = mean.shape[0]
    lam = ut.lambda_(L)
    if L + lam <= 0:
        raise ValueError(f'L + lambda must be positive, got {L + lam}')
    try:
        S = scipy.linalg.cholesky((L + lam) * cov, lower=True)
    except (np.linalg.LinAlgError, ValueError):
        try:
            S = scipy.linalg.cholesky((L + lam) * nearest_positive_definite(cov), lower=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f'sigma-point square root failed after repair: {e}') from e
    points = np.concatenate([mean[None], mean[None] + S.T, mean[None] - S.T], axis=0)
    wm = np.full(2 * L + 1, 1 / (2 * (L + lam)))
    wc = wm.copy()
    wm[0] = lam / (L + lam)
    wc[0] = wm[0] + (1 - ut.alpha ** 2 + ut.beta)
    return SigmaPointSet(points, wm, wc)


def _weighted_cov(wc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (wc[:, None] * a).T @ b


@no_warnings()
def ukf_predict(belief: Belief, u: np.ndarray, f: Callable[[np.ndarray, np.ndarray], np.ndarray], noise: NoiseStatistics, ut: UtParams = UtParams(), return_stats: bool = False):
    """Unscented time update x' = f(x, u) + w, w ~ N(q, Q).

    Args:
        belief (Belief): prior
        u (np.ndarray): control held over the step
        f (Callable): process function, vectorized over the leading axis of its [N, L] input
        noise (NoiseStatistics): q and Q are used
        ut (UtParams): scaling parameters
        return_stats (bool): also return the propagated sigma-point mean f_hat and covariance E[f f^T] - f_hat f_hat^T

    Returns:
        Belief, or (Belief, f_hat, f_cov) if return_stats
    """
    sp = sigma_points(belief.mean, belief.cov, ut)
    Y = np.asarray(f(sp.points, u), dtype=float)
    if not np.all(np.isfinite(Y)):
        raise DivergenceError('process function produced non-finite sigma points')
    f_hat = sp.wm @ Y
    dev = Y - f_hat
    f_cov = _symmetrize(_weighted_cov(sp.wc, dev, dev))
    predicted = Belief(f_hat + noise.q, _symmetrize(f_cov + noise.Q))
    if return_stats:
        return predicted, f_hat, f_cov
    return predicted


@no_warnings()
def ukf_update(belief: Belief, z: np.ndarray, h: Callable[[np.ndarray, np.ndarray], np.ndarray], noise: NoiseStatistics, ut: UtParams = UtParams(), u: np.ndarray = None, return_stats: bool = False):
    """Unscented measurement update for z = h(x, u) + v, v ~ N(r, R).

    Args:
        belief (Belief): predicted belief
        z (np.ndarray): [m] measurement
        h (Callable): observation function, vectorized over the leading axis of its [N, L] input
        noise (NoiseStatistics): r and R are used
        ut (UtParams): scaling parameters
        u (np.ndarray, optional): control passed to h
        return_stats (bool): also return h_hat and the sigma-point covariance E[h h^T] - h_hat h_hat^T

    Returns:
        (posterior, innovation), or (posterior, innovation, h_hat, h_cov) if return_stats
    """
    z = np.asarray(z, dtype=float)
    sp = sigma_points(belief.mean, belief.cov, ut)
    Z = np.asarray(h(sp.points, u), dtype=float)
    if not np.all(np.isfinite(Z)):
        raise DivergenceError('observation function produced non-finite values')
    h_hat = sp.wm @ Z
    dz = Z - h_hat
    dx = sp.points - belief.mean
    h_cov = _symmetrize(_weighted_cov(sp.wc, dz, dz))
    S = _symmetrize(h_cov + noise.R)
    C = _weighted_cov(sp.wc, dx, dz)
    try:
        factor = scipy.linalg.cho_factor(S, lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'innovation covariance is singular: {e}') from e
    K = scipy.linalg.cho_solve(factor, C.T).T
    innovation = z - (h_hat + noise.r)
    posterior = Belief(belief.mean + K @ innovation, _symmetrize(belief.cov - K @ S @ K.T))
    if return_stats:
        return posterior, innovation, h_hat, h_cov
    return posterior, innovation


DEFAULT_PARAMETER_BOUNDS: Dict[str, Tuple[float, float]] = {
    'm': (5.0, 50.0),
    'm_s': (4.0, 45.0),
    'I_z': (1e-3, 10.0),
    'I_f': (1e-3, 1.0),
    'I_r': (1e-3, 1.0),
    'I_x_R': (1e-3, 10.0),
    'I_y_P': (1e-3, 10.0),
    'l_f': (0.05, 1.0),
    'l_r': (0.05, 1.0),
    'h': (0.01, 0.5),
    'h_s': (0.02, 0.5),
    'K_f': (100.0, 20000.0),
    'K_r': (100.0, 20000.0),
    'C_f': (1.0, 2000.0),
    'C_r': (1.0, 2000.0),
    'B': (0.1, 5.0),
    'C': (0.1, 5.0),
    'D': (0.1, 3.0),
    'E': (-5.0, 1.0),
    'S_h': (-1.0, 1.0),
    'S_v': (-1.0, 1.0),
}


@dataclass(frozen=True)
class ParameterSpec:
    "Names and physical bounds of the parameters appended to the state"
    names: Tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_names(cls, names: Sequence[str], bounds: Mapping[str, Tuple[float, float]] = None) -> 'ParameterSpec':
        bounds = {**DEFAULT_PARAMETER_BOUNDS, **(bounds or {})}
        missing = [name for name in names if name not in bounds]
        if missing:
            raise KeyError(f'no bounds known for parameters {missing}')
        return cls(
            names=tuple(names),
            lower=np.array([bounds[name][0] for name in names], dtype=float),
            upper=np.array([bounds[name][1] for name in names], dtype=float),
        )

    def clip(self, p: np.ndarray) -> np.ndarray:
        return np.clip(p, self.lower, self.upper)


@dataclass
class AugmentedState:
    "Physical state x stacked with the parameter vector p"
    x: np.ndarray
    p: np.ndarray
    spec: ParameterSpec

    @property
    def n_state(self) -> int:
        return len(self.x)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.spec.clip(self.p)])

    def clamp(self, vector: np.ndarray) -> np.ndarray:
        "Clip the parameter components of [..., n + n_p] vectors to their bounds"
        vector = np.array(vector, dtype=float)
        vector[..., self.n_state:] = self.spec.clip(vector[..., self.n_state:])
        return vector

    def split(self, vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return vector[..., :self.n_state], vector[..., self.n_state:]


def joint_state_augment(f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], state: AugmentedState, Q: np.ndarray, Q_p: np.ndarray) -> Tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray]:
    """Joint state-parameter process: F([x; p], u) = [f(x, u; p); p], noise diag(Q, Q_p).

    The physical model sees parameters clipped to their bounds; the parameter
    components themselves follow a random walk.

    Args:
        f (Callable): f(x [N, n], u, p [N, n_p]) -> [N, n]
        state (AugmentedState): layout and bounds
        Q (np.ndarray): [n, n] physical process-noise covariance
        Q_p (np.ndarray): [n_p] or [n_p, n_p] parameter random-walk covariance

    Returns:
        (F, Q_a): augmented process function and covariance
    """
    Q_p = np.asarray(Q_p, dtype=float)
    if Q_p.ndim == 1:
        Q_p = np.diag(Q_p)
    assert np.all(np.diag(Q_p) >= 0), 'Q_p diagonal must be nonnegative'
    n = state.n_state

    def F(xa: np.ndarray, u: np.ndarray) -> np.ndarray:
        x, p = xa[..., :n], xa[..., n:]
        return np.concatenate([f(x, u, state.spec.clip(p)), p], axis=-1)

    return F, scipy.linalg.block_diag(np.asarray(Q, dtype=float), Q_p)


def vehicle_process_model(model: Callable[..., np.ndarray], params: VehicleParams, mf: MagicFormulaParams, parameter_names: Sequence[str], dt: float, substeps: int = 1) -> Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]:
    """Discrete-time vehicle process f(x, u, p) with selected parameters taken from p.

    Args:
        model (Callable): one of the vehicle derivative functions
        params (VehicleParams): values of the parameters not being estimated
        mf (MagicFormulaParams): tire coefficients not being estimated
        parameter_names (Sequence[str]): fields of `params` or `mf`, in the order of p's columns
        dt (float): filter period (s)
        substeps (int): RK4 steps per filter period
    """
    vehicle_names = {f.name for f in fields(params)}
    for name in parameter_names:
        if name not in vehicle_names and name not in MF_FIELDS:
            raise KeyError(f'{name!r} is neither a vehicle nor a tire parameter')

    def f(x: np.ndarray, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        vehicle_updates = {name: p[..., i] for i, name in enumerate(parameter_names) if name in vehicle_names}
        tire_updates = {name: p[..., i] for i, name in enumerate(parameter_names) if name in MF_FIELDS}
        vp = replace(params, **vehicle_updates) if vehicle_updates else params
        mfp = replace(mf, **tire_updates) if tire_updates else mf
        for _ in range(substeps):
            x = integrate_rk4(model, x, u, dt / substeps, vp, mfp, strict=False)
        return x

    return f


def state_observation(state_fields: Sequence[str], measured: Sequence[str]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    "Observation function selecting the `measured` components of a state laid out as `state_fields`"
    index = [list(state_fields).index(name) for name in measured]

    def h(x: np.ndarray, u: np.ndarray = None) -> np.ndarray:
        return x[..., index]

    return h


class NoiseSampleWindow:
    """Fixed-length windows of noise samples and their sigma-point statistics.

    Observation samples hold r_k = y_k - h_hat_k with E[h h^T] - h_hat h_hat^T;
    process samples hold q_k = x_hat_k - f_hat_{k-1} with E[f f^T] - f_hat f_hat^T and P_k.
    """
    def __init__(self, capacity_observation: int, capacity_process: int = None):
        assert capacity_observation >= 2, 'windows need room for at least two samples'
        capacity_process = capacity_observation if capacity_process is None else capacity_process
        self.observation: Deque[Tuple[np.ndarray, np.ndarray]] = deque(maxlen=capacity_observation)
        self.process: Deque[Tuple[np.ndarray, np.ndarray, np.ndarray]] = deque(maxlen=capacity_process)
        self.repairs = 0

    @classmethod
    def from_seconds(cls, seconds: float, rate: float) -> 'NoiseSampleWindow':
        return cls(max(int(round(seconds * rate)), 2))

    def push_observation(self, r: np.ndarray, h_cov: np.ndarray):
        self.observation.append((np.asarray(r, dtype=float), np.asarray(h_cov, dtype=float)))

    def push_process(self, q: np.ndarray, f_cov: np.ndarray, P: np.ndarray):
        self.process.append((np.asarray(q, dtype=float), np.asarray(f_cov, dtype=float), np.asarray(P, dtype=float)))


def estimate_observation_noise(window: NoiseSampleWindow, eps: float = 1e-9, return_repaired: bool = False):
    """Limited-memory observation-noise mean and covariance.

    r_hat = mean(r_k)
    R_hat = 1/(N-1) sum[(r_k - r_hat)(r_k - r_hat)^T - (N-1)/N (E[h h^T]_k - h_hat_k h_hat_k^T)]

    Returns:
        (r_hat, R_hat), plus the repair flag if return_repaired
    """
    N = len(window.observation)
    if N < 2:
        raise InsufficientDataError(f'observation window holds {N} samples, need 2')
    r = np.stack([sample[0] for sample in window.observation])
    h_cov = np.stack([sample[1] for sample in window.observation])
    r_hat = r.mean(axis=0)
    dev = r - r_hat
    R_raw = dev.T @ dev / (N - 1) - h_cov.mean(axis=0)
    R_hat, repaired = nearest_positive_definite(R_raw, eps, return_repaired=True)
    if return_repaired:
        return r_hat, R_hat, repaired
    return r_hat, R_hat


def estimate_process_noise(window: NoiseSampleWindow, eps: float = 1e-9, return_repaired: bool = False):
    """Limited-memory process-noise mean and covariance.

    q_hat = mean(q_k)
    Q_hat = 1/(M-1) sum[(q_k - q_hat)(q_k - q_hat)^T - (M-1)/M (E[f f^T]_k - f_hat_k f_hat_k^T - P_k)]

    Returns:
        (q_hat, Q_hat), plus the repair flag if return_repaired
    """
    M = len(window.process)
    if M < 2:
        raise InsufficientDataError(f'process window holds {M} samples, need 2')
    q = np.stack([sample[0] for sample in window.process])
    f_cov = np.stack([sample[1] for sample in window.process])
    P = np.stack([sample[2] for sample in window.process])
    q_hat = q.mean(axis=0)
    dev = q - q_hat
    Q_raw = dev.T @ dev / (M - 1) - (f_cov - P).mean(axis=0)
    Q_hat, repaired = nearest_positive_definite(Q_raw, eps, return_repaired=True)
    if return_repaired:
        return q_hat, Q_hat, repaired
    return q_hat, Q_hat


class FilterModel(NamedTuple):
    """Process and observation functions of a (possibly augmented) system.

    f(x [N, L], u) -> [N, L]; h(x [N, L], u) -> [N, m]. The first n_state
    components are physical; the rest follow a random walk with covariance Q_p.
    """
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    h: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n_state: int
    Q_p: np.ndarray = None
    clamp: Callable[[np.ndarray], np.ndarray] = None


def _augmented_noise(stats: NoiseStatistics, model: FilterModel) -> NoiseStatistics:
    L_p = 0 if model.Q_p is None else len(model.Q_p)
    if L_p == 0:
        return stats
    return NoiseStatistics(
        q=np.concatenate([stats.q, np.zeros(L_p)]),
        Q=scipy.linalg.block_diag(stats.Q, np.diag(model.Q_p)),
        r=stats.r, R=stats.R,
    )


def alm_ukf_step(
    belief: Belief,
    stats: NoiseStatistics,
    windows: NoiseSampleWindow,
    z: np.ndarray,
    u: np.ndarray,
    model: FilterModel,
    ut: UtParams = UtParams(),
    adaptive: bool = True,
    min_samples: int = 2,
) -> Tuple[Belief, NoiseStatistics]:
    """One adaptive limited-memory joint-state UKF step.

    Predicts with the current statistics (parameter block noise reset to
    `model.Q_p`), updates with z, clamps parameters, then pushes the new noise
    samples and re-estimates {q, Q, r, R} from the windows. With
    `adaptive=False` the statistics stay fixed and the step is a plain
    joint-state UKF step.

    Returns:
        (posterior belief, noise statistics)
    """
    n = model.n_state
    predicted, f_hat, f_cov = ukf_predict(belief, u, model.f, _augmented_noise(stats, model), ut, return_stats=True)
    posterior, innovation, h_hat, h_cov = ukf_update(predicted, z, model.h, stats, ut, u=u, return_stats=True)
    if model.clamp is not None:
        posterior = Belief(model.clamp(posterior.mean), posterior.cov)
    if not adaptive:
        return posterior, stats

    windows.push_observation(np.asarray(z, dtype=float) - h_hat, h_cov)
    windows.push_process(posterior.mean[:n] - f_hat[:n], f_cov[:n, :n], posterior.cov[:n, :n])
    stats = stats.copy()
    repairs = 0
    if len(windows.observation) >= max(min_samples, 2):
        stats.r, stats.R, repaired = estimate_observation_noise(windows, return_repaired=True)
        repairs += repaired
    if len(windows.process) >= max(min_samples, 2):
        stats.q, stats.Q, repaired = estimate_process_noise(windows, return_repaired=True)
        repairs += repaired
    if repairs:
        windows.repairs += repairs
        logger.warning(f'noise estimate repaired to positive definite ({windows.repairs} repairs so far)')
    return posterior, stats


class JointStateUKF:
    """Sequential joint state/parameter filter with optional adaptive noise statistics.

    One instance is advanced one step at a time; it may be handed to another
    worker between steps but is not safe to share.
    """
    def __init__(
        self,
        model: FilterModel,
        belief: Belief,
        stats: NoiseStatistics,
        rate: float,
        ut: UtParams = UtParams(),
        adaptive: bool = True,
        window_seconds: float = 10.0,
        min_samples: int = None,
    ):
        self.model = model
        self.belief = belief
        self.stats = stats
        self.ut = ut
        self.adaptive = adaptive
        self.windows = NoiseSampleWindow.from_seconds(window_seconds, rate)
        self.min_samples = min_samples if min_samples is not None else max(20, 2 * len(stats.r))
        self.steps = 0

    def step(self, z: np.ndarray, u: np.ndarray) -> Belief:
        n = self.model.n_state
        self.belief, self.stats = alm_ukf_step(
            self.belief, self.stats, self.windows, z, u, self.model,
            ut=self.ut, adaptive=self.adaptive, min_samples=self.min_samples,
        )
        self.steps += 1
        if self.steps % 1000 == 0:
            logger.info(f'step {self.steps}: parameters {np.array2string(self.belief.mean[n:], precision=4)}')
        return self.belief

    @property
    def repairs(self) -> int:
        "Number of noise estimates repaired to positive definite so far"
        return self.windows.repairs

    @property
    def parameters(self) -> np.ndarray:
        return self.belief.mean[self.model.n_state:]


def _jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float) -> np.ndarray:
    "Central-difference Jacobian, evaluated as one batch"
    L = len(x)
    steps = eps * np.maximum(np.abs(x), 1.0)
    perturbed = np.concatenate([x + np.diag(steps), x - np.diag(steps)], axis=0)
    values = np.asarray(fn(perturbed))
    return ((values[:L] - values[L:]) / (2 * steps[:, None])).T


def observability_rank(
    F: Callable[[np.ndarray, np.ndarray], np.ndarray],
    H: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    u: np.ndarray,
    n_steps: int = None,
    eps: float = 1e-6,
    rtol: float = 1e-9,
) -> Tuple[int, np.ndarray]:
    """Numerical rank of the local observability matrix [C; C A; C A^2; ...] at (x, u).

    Args:
        F, H: discrete process and observation functions, vectorized over a leading axis
        x (np.ndarray): [L] linearization point
        u (np.ndarray): control
        n_steps (int): number of block rows, default L
        eps (float): relative finite-difference step
        rtol (float): singular values below rtol * largest count as zero

    Returns:
        (rank, singular values)
    """
    x = np.asarray(x, dtype=float)
    L = len(x)
    A = _jacobian(lambda X: F(X, u), x, eps)
    C = _jacobian(lambda X: H(X, u), x, eps)
    blocks = [C]
    for _ in range((n_steps or L) - 1):
        blocks.append(blocks[-1] @ A)
    singular = np.linalg.svd(np.concatenate(blocks, axis=0), compute_uv=False)
    rank = int(np.sum(singular > rtol * singular[0])) if singular[0] > 0 else 0
    return rank, singular


def vehicle_joint_filter(
    model: Callable[..., np.ndarray],
    params: VehicleParams,
    mf: MagicFormulaParams,
    parameter_names: Sequence[str],
    initial_parameters: np.ndarray,
    x0: np.ndarray,
    state_fields: Sequence[str],
    measured: Sequence[str],
    rate: float,
    process_sigma: np.ndarray,
    observation_sigma: np.ndarray,
    parameter_sigma: np.ndarray,
    initial_state_sigma: np.ndarray = None,
    initial_parameter_fraction: float = 0.3,
    bounds: Mapping[str, Tuple[float, float]] = None,
    substeps: int = 1,
    ut: UtParams = UtParams(),
    adaptive: bool = True,
    window_seconds: float = 10.0,
) -> JointStateUKF:
    """Joint state/parameter filter for a vehicle model observed through a subset of its states.

    Args:
        model (Callable): vehicle derivative function
        params (VehicleParams): values of the parameters not being estimated
        mf (MagicFormulaParams): tire coefficients not being estimated
        parameter_names (Sequence[str]): estimated vehicle or tire parameters
        initial_parameters (np.ndarray): [n_p] initial guesses
        x0 (np.ndarray): [n] initial state
        state_fields (Sequence[str]): state layout
        measured (Sequence[str]): observed state components
        rate (float): filter rate (Hz)
        process_sigma, observation_sigma, parameter_sigma: initial noise standard deviations
        initial_state_sigma (np.ndarray): [n] prior state standard deviation, default `process_sigma`
        initial_parameter_fraction (float): prior parameter standard deviation relative to the initial guess

    Returns:
        JointStateUKF
    """
    spec = ParameterSpec.from_names(parameter_names, bounds)
    state = AugmentedState(np.asarray(x0, dtype=float), np.asarray(initial_parameters, dtype=float), spec)
    f = vehicle_process_model(model, params, mf, parameter_names, 1 / rate, substeps)
    F, _ = joint_state_augment(f, state, np.zeros((state.n_state, state.n_state)), np.zeros(len(parameter_names)))
    filter_model = FilterModel(
        f=F,
        h=state_observation(state_fields, measured),
        n_state=state.n_state,
        Q_p=np.square(np.asarray(parameter_sigma, dtype=float)),
        clamp=state.clamp,
    )
    initial_state_sigma = process_sigma if initial_state_sigma is None else initial_state_sigma
    cov = np.diag(np.concatenate([
        np.square(np.asarray(initial_state_sigma, dtype=float)),
        np.square(initial_parameter_fraction * np.abs(state.p)),
    ]))
    return JointStateUKF(
        filter_model, Belief(state.vector(), cov),
        NoiseStatistics.from_sigmas(process_sigma, observation_sigma),
        rate, ut=ut, adaptive=adaptive, window_seconds=window_seconds,
    )
