import logging
from dataclasses import dataclass
from typing import *

import numpy as np

from ._helpers import NumericalError, no_warnings
from .chassis import commands_to_controls
from .tire import MagicFormulaParams
from .track import CostMap
from .vehicle import STATE3_FIELDS, STATE11_FIELDS, VehicleParams, full_vehicle_derivatives, integrate_rk4, single_track_derivatives


__all__ = [
    'MppiParams',
    'Rollouts',
    'MppiController',
    'running_cost',
    'sample_rollouts',
    'softmax_weights',
    'mppi_update',
    'mpc_step',
]

logger = logging.getLogger(__name__)

CONTROL_LOWER = np.array([-1.0, -1.0])
CONTROL_UPPER = np.array([1.0, 1.0])


@dataclass(frozen=True)
class MppiParams:
    """Sampling, cost and horizon settings.

    sigma holds the per-channel standard deviations of the (steering,
    throttle) sampling noise; w weighs (track cost, speed error, crash
    indicator, slip) in the running cost.
    """
    K: int = 128
    T: int = 48
    dt: float = 0.025
    lambda_: float = 0.05
    gamma: float = 0.1
    sigma: Tuple[float, float] = (0.3, 0.25)
    w: Tuple[float, float, float, float] = (100.0, 4.25, 10000.0, 1.75)
    v_desired: float = 6.0
    track_threshold: float = 0.9
    roll_threshold: float = 0.35
    heading_threshold: float = 1.5
    slip_min_speed: float = 0.5
    indicator_decay: float = 0.9

    def __post_init__(self):
        if self.K < 1 or self.T < 1:
            raise ValueError(f'K and T must be at least 1, got K={self.K}, T={self.T}')
        if not self.lambda_ > 0:
            raise ValueError(f'lambda must be positive, got {self.lambda_}')
        if len(self.sigma) != 2 or any(s < 0 for s in self.sigma):
            raise ValueError(f'sigma must hold two nonnegative standard deviations, got {self.sigma}')
        if len(self.w) != 4:
            raise ValueError(f'w must hold four weights, got {self.w}')

    @property
    def Sigma(self) -> np.ndarray:
        return np.diag(np.square(self.sigma))


class Rollouts(NamedTuple):
    controls: np.ndarray    # [K, T, 2] clamped sampled sequences E_k
    noise: np.ndarray       # [K, T, 2] E_k - U
    costs: np.ndarray       # [K] S(E_k), +inf for diverged rollouts
    states: np.ndarray      # [K, T + 1, n]


@no_warnings()
def running_cost(state: np.ndarray, costmap: CostMap, params: MppiParams, t: int = 0) -> np.ndarray:
    """Running cost of [..., n] states at horizon step t.

    q = w . (C_M(p_x, p_y), (V_x - V_d)^2, decay^t I, (V_y / V_x)^2)

    I is 1 when the track cost, |roll| or the heading error |atan2(V_y, V_x)|
    exceeds its threshold. The slip term is 0 while |V_x| < slip_min_speed.
    Roll is read from 14-component states and taken as 0 otherwise.
    """
    state = np.asarray(state, dtype=float)
    V_x, V_y = state[..., 0], state[..., 1]
    track = costmap.query(state[..., 4:6])
    roll = state[..., 12] if state.shape[-1] >= 14 else np.zeros_like(V_x)
    heading_error = np.abs(np.arctan2(V_y, V_x))
    indicator = (track > params.track_threshold) | (np.abs(roll) > params.roll_threshold) | (heading_error > params.heading_threshold)
    moving = np.abs(V_x) >= params.slip_min_speed
    slip = np.where(moving, np.square(V_y / np.where(moving, V_x, 1.0)), 0.0)
    w = params.w
    return (
        w[0] * track
        + w[1] * np.square(V_x - params.v_desired)
        + w[2] * params.indicator_decay ** t * indicator
        + w[3] * slip
    )


def sample_rollouts(
    U: np.ndarray,
    state: np.ndarray,
    params: MppiParams,
    costmap: CostMap,
    vehicle: VehicleParams = VehicleParams(),
    mf: MagicFormulaParams = MagicFormulaParams(),
    seed: int = 0,
    step: int = 0,
    model: Callable[..., np.ndarray] = single_track_derivatives,
    indices: Sequence[int] = None,
) -> Rollouts:
    """Perturb the control sequence and propagate the samples through the model.

    Rollout k draws its noise from `default_rng([seed, step, k])`, so any
    subset of `indices` reproduces the corresponding rows of the full batch.

    Args:
        U (np.ndarray): [T, 2] nominal (steering, throttle) sequence
        state (np.ndarray): [n] current state
        params (MppiParams): sampling and cost settings
        costmap (CostMap): positional costs
        vehicle (VehicleParams): rollout model parameters
        mf (MagicFormulaParams): rollout tire parameters
        seed (int): controller seed
        step (int): controller step counter
        model (Callable): vehicle derivative function
        indices (Sequence[int], optional): rollout ids, default range(K)

    Returns:
        Rollouts
    """
    U = np.asarray(U, dtype=float)
    assert U.shape == (params.T, 2), f'U must have shape ({params.T}, 2), got {U.shape}'
    indices = range(params.K) if indices is None else indices
    sigma = np.asarray(params.sigma, dtype=float)
    raw = np.stack([np.random.default_rng([seed, step, k]).standard_normal((params.T, 2)) for k in indices])
    E = np.clip(U + raw * sigma, CONTROL_LOWER, CONTROL_UPPER)

    x = np.repeat(np.asarray(state, dtype=float)[None], len(E), axis=0)
    states = [x]
    costs = np.zeros(len(E))
    for t in range(params.T):
        x = integrate_rk4(model, x, commands_to_controls(E[:, t], vehicle), params.dt, vehicle, mf, strict=False)
        states.append(x)
        costs = costs + running_cost(x, costmap, params, t)
    states = np.stack(states, axis=1)
    diverged = ~np.all(np.isfinite(states.reshape(len(E), -1)), axis=-1) | ~np.isfinite(costs)
    costs = np.where(diverged, np.inf, costs)
    return Rollouts(E, E - U, costs, states)


def softmax_weights(costs: np.ndarray, lambda_: float) -> np.ndarray:
    """Normalized importance weights exp(-(S_k - min S) / lambda); infinite costs get weight 0"""
    costs = np.asarray(costs, dtype=float)
    finite = np.isfinite(costs)
    if not finite.any():
        raise NumericalError('no valid rollout: every sampled cost is infinite')
    shifted = np.where(finite, costs - costs[finite].min(), np.inf)
    weights = np.exp(-shifted / lambda_)
    return weights / weights.sum()


def mppi_update(U: np.ndarray, rollouts: Rollouts, params: MppiParams) -> np.ndarray:
    """Cost-weighted average of the sampled sequences.

    The weights use S(E_k) + gamma sum_t u_t^T Sigma^-1 eps_k^t. Channels
    with zero sampling variance contribute no control cost.

    Returns:
        np.ndarray: [T, 2] updated sequence, clamped to the actuator range
    """
    U = np.asarray(U, dtype=float)
    sigma2 = np.square(np.asarray(params.sigma, dtype=float))
    inv_sigma2 = np.divide(1.0, sigma2, out=np.zeros_like(sigma2), where=sigma2 > 0)
    control_cost = params.gamma * np.einsum('tc,c,ktc->k', U, inv_sigma2, rollouts.noise)
    weights = softmax_weights(rollouts.costs + control_cost, params.lambda_)
    return np.clip(np.tensordot(weights, rollouts.controls, axes=1), CONTROL_LOWER, CONTROL_UPPER)


class MppiController:
    """Receding-horizon MPPI: holds the planned sequence and the step counter."""
    def __init__(
        self,
        params: MppiParams,
        costmap: CostMap,
        vehicle: VehicleParams = VehicleParams(),
        mf: MagicFormulaParams = MagicFormulaParams(),
        seed: int = 0,
        model: Callable[..., np.ndarray] = single_track_derivatives,
        U: np.ndarray = None,
    ):
        self.params = params
        self.costmap = costmap
        self.vehicle = vehicle
        self.mf = mf
        self.seed = seed
        self.model = model
        self.U = np.zeros((params.T, 2)) if U is None else np.array(U, dtype=float)
        self.step = 0
        self.last_rollouts: Rollouts = None

    def optimize(self, state: np.ndarray) -> np.ndarray:
        "One sampling/update iteration from `state`, without shifting"
        n = len(STATE11_FIELDS) if self.model is full_vehicle_derivatives else len(STATE3_FIELDS)
        state = np.asarray(state, dtype=float)[:n]
        self.last_rollouts = sample_rollouts(
            self.U, state, self.params, self.costmap, self.vehicle, self.mf,
            seed=self.seed, step=self.step, model=self.model,
        )
        self.U = mppi_update(self.U, self.last_rollouts, self.params)
        self.step += 1
        return self.U


def mpc_step(controller: MppiController, state: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Optimize from the feedback state, return the first control and shift the plan.

    Returns:
        (u_0 [2], shifted sequence [T, 2])
    """
    U = controller.optimize(state)
    u0 = U[0].copy()
    controller.U = np.concatenate([U[1:], U[-1:]], axis=0)
    if controller.step % 400 == 0:
        finite = np.isfinite(controller.last_rollouts.costs)
        logger.debug(f'step {controller.step}: best cost {controller.last_rollouts.costs[finite].min():.2f}, {finite.sum()}/{len(finite)} valid rollouts')
    return u0, controller.U
