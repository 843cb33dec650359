import numpy as np
from typing import *
from dataclasses import dataclass, fields

from ._helpers import DomainError, DivergenceError, finite_or_raise, no_warnings
from .tire import MagicFormulaParams, wheel_slip, magic_formula_mu, tire_forces


__all__ = [
    'STATE3_FIELDS',
    'STATE11_FIELDS',
    'CONTROL_FIELDS',
    'VehicleParams',
    'FullVehicleParams',
    'VehicleState3',
    'VehicleState11',
    'ControlInput',
    'PRESETS',
    'vehicle_preset',
    'normal_loads',
    'body_forces',
    'single_track_derivatives',
    'double_track_derivatives',
    'full_vehicle_derivatives',
    'integrate_rk4',
]


STATE3_FIELDS = ('V_x', 'V_y', 'r', 'psi', 'p_x', 'p_y', 'omega_f', 'omega_r')
STATE11_FIELDS = STATE3_FIELDS + ('z_s', 'V_z_s', 'theta', 'theta_dot', 'phi', 'phi_dot')
CONTROL_FIELDS = ('delta', 'drive', 'brake_front')

SMALL_ANGLE_LIMIT = np.pi / 6


@dataclass(frozen=True)
class VehicleParams:
    """Planar vehicle parameters.

    Fields may hold arrays broadcastable against the batch of states, so a
    filter can evaluate one parameter set per sigma point.

    drive_mode selects how `ControlInput.drive` is read: 'torque' as rear axle
    torque (N m), 'force' as the equivalent force at the contact patch (N).
    A negative drive requests rear braking of that magnitude.
    """
    m: float = 21.88
    I_z: float = 1.124
    l_f: float = 0.34
    l_r: float = 0.23
    R: float = 0.0975
    I_f: float = 0.048
    I_r: float = 0.044
    w_f: float = 0.395
    w_r: float = 0.405
    h: float = 0.12
    g: float = 9.81
    delta_max: float = 0.35
    drive_torque_max: float = 12.0
    brake_torque_max: float = 8.0
    brake_omega_scale: float = 1.0
    drive_mode: str = 'torque'

    def __post_init__(self):
        for name in ('m', 'I_z', 'l_f', 'l_r', 'R', 'I_f', 'I_r', 'h', 'g', 'delta_max'):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise DomainError(f'vehicle parameter {name} must be positive, got {getattr(self, name)}')
        for name in ('w_f', 'w_r', 'drive_torque_max', 'brake_torque_max'):
            if not np.all(np.asarray(getattr(self, name)) >= 0):
                raise DomainError(f'vehicle parameter {name} must be nonnegative, got {getattr(self, name)}')
        if self.drive_mode not in ('torque', 'force'):
            raise DomainError(f'unknown drive_mode {self.drive_mode!r}')

    @property
    def wheelbase(self):
        return self.l_f + self.l_r


@dataclass(frozen=True)
class FullVehicleParams(VehicleParams):
    "Adds the sprung-mass riding, pitch and roll model and air drag"
    m_s: float = 18.46
    m_tire_f: float = 0.82
    m_tire_r: float = 0.89
    K_f: float = 2000.0
    K_r: float = 2000.0
    C_f: float = 150.0
    C_r: float = 150.0
    h_s: float = 0.12
    h_c: float = 0.04
    I_x_R: float = 0.347
    I_y_P: float = 1.131
    C_D: float = 0.65
    rho_air: float = 1.225
    A: float = 0.1

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.asarray(self.m_s + 2 * self.m_tire_f + 2 * self.m_tire_r) <= np.asarray(self.m) + 1e-9):
            raise DomainError('sprung plus tire masses exceed the total mass')
        for name in ('K_f', 'K_r', 'C_f', 'C_r', 'h_c', 'C_D', 'rho_air', 'A'):
            if not np.all(np.asarray(getattr(self, name)) >= 0):
                raise DomainError(f'vehicle parameter {name} must be nonnegative, got {getattr(self, name)}')
        for name in ('m_s', 'I_x_R', 'I_y_P'):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise DomainError(f'vehicle parameter {name} must be positive, got {getattr(self, name)}')
        if not np.all(np.asarray(self.h_s) > np.asarray(self.h_c)):
            raise DomainError('sprung-mass CG must lie above the roll center')


PRESETS: Dict[str, Dict[str, float]] = {
    # measured on the scale vehicle
    'autorally': {},
    # identified online by the adaptive filter
    'autorally_alm': {'m': 20.6093, 'I_z': 1.024, 'I_r': 0.0499, 'h': 0.0961, 'l_f': 0.4650},
}


def vehicle_preset(name: str = 'autorally', full: bool = False, **overrides) -> Union[VehicleParams, FullVehicleParams]:
    """Named parameter set with optional per-field overrides.

    Args:
        name (str): key of `PRESETS`
        full (bool): return `FullVehicleParams` instead of `VehicleParams`
        **overrides: field values replacing the preset's

    Returns:
        VehicleParams or FullVehicleParams
    """
    if name not in PRESETS:
        raise KeyError(f'unknown vehicle preset {name!r}, expected one of {sorted(PRESETS)}')
    cls = FullVehicleParams if full else VehicleParams
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise KeyError(f'unknown vehicle parameters {sorted(unknown)}')
    values = {**PRESETS[name], **overrides}
    if full and 'm' in values and 'm_s' not in overrides:
        values['m_s'] = values['m'] - 2 * values.get('m_tire_f', 0.82) - 2 * values.get('m_tire_r', 0.89)
    return cls(**values)


@dataclass
class VehicleState3:
    V_x: float = 0.0
    V_y: float = 0.0
    r: float = 0.0
    psi: float = 0.0
    p_x: float = 0.0
    p_y: float = 0.0
    omega_f: float = 0.0
    omega_r: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE3_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'VehicleState3':
        return cls(*(float(v) for v in np.asarray(array)[:len(STATE3_FIELDS)]))


@dataclass
class VehicleState11(VehicleState3):
    z_s: float = 0.0
    V_z_s: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0
    phi: float = 0.0
    phi_dot: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STATE11_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'VehicleState11':
        return cls(*(float(v) for v in np.asarray(array)[:len(STATE11_FIELDS)]))


@dataclass
class ControlInput:
    delta: float = 0.0
    drive: float = 0.0
    brake_front: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.delta, self.drive, self.brake_front], dtype=float)


def normal_loads(s: np.ndarray, u: np.ndarray, p: VehicleParams, a_x: np.ndarray, a_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Quasi-static tire normal loads.

    Static axle split plus longitudinal transfer m a_x h / L. Lateral transfer
    m a_y h / w is shared between the axles in proportion to their static
    load; a zero track width transfers nothing. Loads are floored at 0.

    Args:
        s (np.ndarray): [..., n] state (unused by the quasi-static model)
        u (np.ndarray): [..., 3] control (unused by the quasi-static model)
        p (VehicleParams): parameters
        a_x (np.ndarray): [...] body-frame longitudinal acceleration (m/s^2)
        a_y (np.ndarray): [...] body-frame lateral acceleration (m/s^2), positive to the left

    Returns:
        Tuple of [...] loads (N): left front, right front, left rear, right rear
    """
    L = p.l_f + p.l_r
    weight = p.m * p.g
    d_long = p.m * np.asarray(a_x, dtype=float) * p.h / L
    front = weight * p.l_r / L - d_long
    rear = weight * p.l_f / L + d_long
    roll_moment = p.m * np.asarray(a_y, dtype=float) * p.h
    w_f = np.asarray(p.w_f, dtype=float)
    w_r = np.asarray(p.w_r, dtype=float)
    d_lat_f = np.where(w_f > 0, roll_moment * (p.l_r / L) / np.where(w_f > 0, w_f, 1.0), 0.0)
    d_lat_r = np.where(w_r > 0, roll_moment * (p.l_f / L) / np.where(w_r > 0, w_r, 1.0), 0.0)
    # positive a_y turns left, loading the right-hand wheels
    return (
        np.maximum(front / 2 - d_lat_f, 0.0),
        np.maximum(front / 2 + d_lat_f, 0.0),
        np.maximum(rear / 2 - d_lat_r, 0.0),
        np.maximum(rear / 2 + d_lat_r, 0.0),
    )


def _tire_list(mf: Union[MagicFormulaParams, Sequence[MagicFormulaParams]], count: int) -> List[MagicFormulaParams]:
    if isinstance(mf, MagicFormulaParams):
        return [mf] * count
    mf = list(mf)
    if len(mf) == 2 and count == 4:
        return [mf[0], mf[0], mf[1], mf[1]]
    if len(mf) == 4 and count == 2:
        return [mf[0], mf[2]]
    assert len(mf) == count, f'expected {count} tire parameter sets, got {len(mf)}'
    return mf


def _wheel_force(v_x: np.ndarray, v_y: np.ndarray, steer: np.ndarray, omega: np.ndarray, f_z: np.ndarray, R: float, mf: MagicFormulaParams) -> Tuple[np.ndarray, np.ndarray]:
    "Wheel-frame tire force for a contact point moving with body-frame velocity (v_x, v_y)"
    cos, sin = np.cos(steer), np.sin(steer)
    v_tx = v_x * cos + v_y * sin
    v_ty = -v_x * sin + v_y * cos
    slip = wheel_slip(v_tx, v_ty, omega, R)
    mu = magic_formula_mu(slip.s_total, mf)
    force = tire_forces(slip, mu, f_z)
    return force.f_x, force.f_y


def _resultant(f_F: Tuple[np.ndarray, np.ndarray], f_R: Tuple[np.ndarray, np.ndarray], delta: np.ndarray, p: VehicleParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    f_Fx, f_Fy = f_F
    f_Rx, f_Ry = f_R
    cos, sin = np.cos(delta), np.sin(delta)
    F_x = f_Fx * cos - f_Fy * sin + f_Rx
    F_y = f_Fx * sin + f_Fy * cos + f_Ry
    M_z = (f_Fy * cos + f_Fx * sin) * p.l_f - f_Ry * p.l_r
    return F_x, F_y, M_z


def _drive_torques(s: np.ndarray, u: np.ndarray, p: VehicleParams) -> Tuple[np.ndarray, np.ndarray]:
    "Rear drive/brake torque and front brake torque (N m), brakes opposing the spin"
    drive = u[..., 1] * (p.R if p.drive_mode == 'force' else 1.0)
    omega_f, omega_r = s[..., 6], s[..., 7]
    rear = np.where(drive >= 0, drive, drive * np.tanh(omega_r / p.brake_omega_scale))
    front_brake = np.clip(u[..., 2], 0.0, 1.0) * p.brake_torque_max * np.tanh(omega_f / p.brake_omega_scale)
    return rear, front_brake


def _drag_force(s: np.ndarray, p: VehicleParams) -> np.ndarray:
    if not isinstance(p, FullVehicleParams):
        return np.zeros(s.shape[:-1])
    V_x = s[..., 0]
    return -p.C_D * p.rho_air * p.A * V_x * np.abs(V_x) / 2


def _planar_forces(s: np.ndarray, u: np.ndarray, p: VehicleParams, mf, double: bool):
    """Two-pass tire forces: loads from static split, then from the resulting accelerations.

    Returns ((F_x, F_y, M_z), f_front_x, f_rear_x) with the wheel-frame longitudinal axle forces.
    """
    V_x, V_y, r = s[..., 0], s[..., 1], s[..., 2]
    omega_f, omega_r = s[..., 6], s[..., 7]
    delta = u[..., 0]
    zero = np.zeros_like(V_x)

    def axle_forces(a_x, a_y):
        loads = normal_loads(s, u, p, a_x, a_y)
        if double:
            tires = _tire_list(mf, 4)
            half_f, half_r = p.w_f / 2, p.w_r / 2
            LF = _wheel_force(V_x - r * half_f, V_y + r * p.l_f, delta, omega_f, loads[0], p.R, tires[0])
            RF = _wheel_force(V_x + r * half_f, V_y + r * p.l_f, delta, omega_f, loads[1], p.R, tires[1])
            LR = _wheel_force(V_x - r * half_r, V_y - r * p.l_r, zero, omega_r, loads[2], p.R, tires[2])
            RR = _wheel_force(V_x + r * half_r, V_y - r * p.l_r, zero, omega_r, loads[3], p.R, tires[3])
            f_F = (LF[0] + RF[0], LF[1] + RF[1])
            f_R = (LR[0] + RR[0], LR[1] + RR[1])
        else:
            tires = _tire_list(mf, 2)
            f_F = _wheel_force(V_x, V_y + r * p.l_f, delta, omega_f, loads[0] + loads[1], p.R, tires[0])
            f_R = _wheel_force(V_x, V_y - r * p.l_r, zero, omega_r, loads[2] + loads[3], p.R, tires[1])
        return f_F, f_R

    drag = _drag_force(s, p)
    f_F, f_R = axle_forces(zero, zero)
    F_x, F_y, _ = _resultant(f_F, f_R, delta, p)
    f_F, f_R = axle_forces((F_x + drag) / p.m, F_y / p.m)
    F_x, F_y, M_z = _resultant(f_F, f_R, delta, p)
    return (F_x + drag, F_y, M_z), f_F[0], f_R[0]


def body_forces(s: np.ndarray, u: np.ndarray, p: VehicleParams, mf: MagicFormulaParams = MagicFormulaParams(), model: Literal['single', 'double', 'full'] = 'single') -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Body-frame force and yaw moment acting on the total mass (tire forces plus drag).

    Returns:
        (F_x, F_y, M_z) each of shape [...]
    """
    s = np.asarray(s, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), s.shape[:-1] + (3,))
    resultant, _, _ = _planar_forces(s, u, p, mf, double=model != 'single')
    return resultant


def _check_input(s: np.ndarray, names: Sequence[str], strict: bool):
    if strict:
        finite_or_raise(s, names, DomainError, 'state')


@no_warnings()
def _planar_derivatives(s: np.ndarray, u: np.ndarray, p: VehicleParams, mf, double: bool) -> np.ndarray:
    (F_x, F_y, M_z), f_front_x, f_rear_x = _planar_forces(s, u, p, mf, double)
    V_x, V_y, r, psi = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    rear_torque, front_brake = _drive_torques(s, u, p)
    cos, sin = np.cos(psi), np.sin(psi)
    return np.stack([
        F_x / p.m + V_y * r,
        F_y / p.m - V_x * r,
        M_z / p.I_z,
        r,
        V_x * cos - V_y * sin,
        V_x * sin + V_y * cos,
        (-p.R * f_front_x - front_brake) / p.I_f,
        (rear_torque - p.R * f_rear_x) / p.I_r,
    ], axis=-1)


def single_track_derivatives(s: np.ndarray, u: np.ndarray, p: VehicleParams = VehicleParams(), mf: MagicFormulaParams = MagicFormulaParams(), strict: bool = True) -> np.ndarray:
    """Time derivative of the lumped-axle (bicycle) model state.

    Args:
        s (np.ndarray): [..., 8] state ordered as `STATE3_FIELDS`
        u (np.ndarray): [..., 3] control ordered as `CONTROL_FIELDS`
        p (VehicleParams): parameters
        mf (MagicFormulaParams): one shared set, or (front, rear)
        strict (bool): raise on non-finite input instead of propagating NaN

    Returns:
        np.ndarray: [..., 8] state derivative
    """
    s = np.asarray(s, dtype=float)
    _check_input(s, STATE3_FIELDS, strict)
    u = np.broadcast_to(np.asarray(u, dtype=float), s.shape[:-1] + (3,))
    return _planar_derivatives(s, u, p, mf, double=False)


def double_track_derivatives(s: np.ndarray, u: np.ndarray, p: VehicleParams = VehicleParams(), mf: MagicFormulaParams = MagicFormulaParams(), strict: bool = True) -> np.ndarray:
    """Time derivative of the four-wheel planar model with lateral load transfer.

    Args:
        s (np.ndarray): [..., 8] state ordered as `STATE3_FIELDS`
        u (np.ndarray): [..., 3] control ordered as `CONTROL_FIELDS`
        p (VehicleParams): parameters
        mf (MagicFormulaParams): one shared set, or four (LF, RF, LR, RR)
        strict (bool): raise on non-finite input instead of propagating NaN

    Returns:
        np.ndarray: [..., 8] state derivative
    """
    s = np.asarray(s, dtype=float)
    _check_input(s, STATE3_FIELDS, strict)
    u = np.broadcast_to(np.asarray(u, dtype=float), s.shape[:-1] + (3,))
    return _planar_derivatives(s, u, p, mf, double=True)


def _sprung_derivatives(susp: np.ndarray, a_x: np.ndarray, a_y: np.ndarray, p: FullVehicleParams) -> np.ndarray:
    "Riding, pitch and roll dynamics of the sprung mass, susp = [..., (z_s, V_z_s, theta, theta_dot, phi, phi_dot)]"
    z, V_z, theta, theta_dot, phi, phi_dot = (susp[..., i] for i in range(6))
    K_sum, C_sum = p.K_f + p.K_r, p.C_f + p.C_r
    K_pitch, C_pitch = p.l_f * p.K_f - p.l_r * p.K_r, p.l_f * p.C_f - p.l_r * p.C_r
    K_pitch2, C_pitch2 = p.l_f ** 2 * p.K_f + p.l_r ** 2 * p.K_r, p.l_f ** 2 * p.C_f + p.l_r ** 2 * p.C_r
    V_z_dot = (-2 * K_sum * theta - 2 * C_sum * V_z + 2 * K_pitch * phi + 2 * C_pitch * theta_dot) / p.m_s
    theta_ddot = (
        2 * K_pitch * z + 2 * C_pitch * V_z - 2 * K_pitch2 * theta - 2 * C_pitch2 * theta_dot
        + p.m_s * p.g * p.h_s * np.sin(theta) + p.m_s * a_x * p.h_s * np.cos(theta)
    ) / p.I_y_P
    roll_arm = p.h_s - p.h_c
    phi_ddot = (
        -p.w_f ** 2 * p.K_f * phi / 2 - p.w_f ** 2 * p.C_f * phi_dot / 2
        - p.w_r ** 2 * p.K_r * phi / 2 - p.w_r ** 2 * p.C_r * phi_dot / 2
        + p.m_s * p.g * roll_arm * np.sin(phi) + p.m_s * a_y * roll_arm * np.cos(phi)
    ) / p.I_x_R
    return np.stack([V_z, V_z_dot, theta_dot, theta_ddot, phi_dot, phi_ddot], axis=-1)


def full_vehicle_derivatives(s: np.ndarray, u: np.ndarray, p: FullVehicleParams = FullVehicleParams(), mf: MagicFormulaParams = MagicFormulaParams(), strict: bool = True) -> np.ndarray:
    """Time derivative of the full model: four-wheel planar dynamics with air drag
    plus the sprung-mass vertical, pitch and roll motion.

    The sprung-mass accelerations a_x, a_y are those of the total-mass solution.

    Args:
        s (np.ndarray): [..., 14] state ordered as `STATE11_FIELDS`
        u (np.ndarray): [..., 3] control ordered as `CONTROL_FIELDS`
        p (FullVehicleParams): parameters
        mf (MagicFormulaParams): one shared set, or four (LF, RF, LR, RR)
        strict (bool): raise on invalid input instead of returning NaN rows

    Returns:
        np.ndarray: [..., 14] state derivative
    """
    s = np.asarray(s, dtype=float)
    assert s.shape[-1] == len(STATE11_FIELDS), f'full model state has {len(STATE11_FIELDS)} components'
    _check_input(s, STATE11_FIELDS, strict)
    out_of_range = (np.abs(s[..., 10]) >= SMALL_ANGLE_LIMIT) | (np.abs(s[..., 12]) >= SMALL_ANGLE_LIMIT)
    if strict and np.any(out_of_range):
        raise DivergenceError('pitch or roll left the small-angle regime (|angle| >= pi/6)')
    u = np.broadcast_to(np.asarray(u, dtype=float), s.shape[:-1] + (3,))
    planar = _planar_derivatives(s, u, p, mf, double=True)
    a_x = planar[..., 0] - s[..., 1] * s[..., 2]
    a_y = planar[..., 1] + s[..., 0] * s[..., 2]
    sprung = _sprung_derivatives(s[..., 8:], a_x, a_y, p)
    ds = np.concatenate([planar, sprung], axis=-1)
    if np.any(out_of_range):
        ds = np.where(out_of_range[..., None], np.nan, ds)
    return ds


def integrate_rk4(model: Callable[..., np.ndarray], s: np.ndarray, u: np.ndarray, dt: float, *args, strict: bool = True, **kwargs) -> np.ndarray:
    """One classical Runge-Kutta step of `ds/dt = model(s, u, *args, **kwargs)`, u held constant.

    Args:
        model (Callable): derivative function, e.g. `single_track_derivatives`
        s (np.ndarray): [..., n] state
        u (np.ndarray): [..., m] control
        dt (float): step (s), in (0, 0.05]
        strict (bool): raise `DivergenceError` on non-finite output; otherwise non-finite rows pass through.
            Forwarded to `model` when it accepts it.

    Returns:
        np.ndarray: [..., n] state after dt
    """
    assert 0 < dt <= 0.05, f'dt must lie in (0, 0.05], got {dt}'
    s = np.asarray(s, dtype=float)
    if model in (single_track_derivatives, double_track_derivatives, full_vehicle_derivatives):
        kwargs['strict'] = strict
    k1 = model(s, u, *args, **kwargs)
    k2 = model(s + dt / 2 * k1, u, *args, **kwargs)
    k3 = model(s + dt / 2 * k2, u, *args, **kwargs)
    k4 = model(s + dt * k3, u, *args, **kwargs)
    out = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if strict:
        names = STATE11_FIELDS if s.shape[-1] == len(STATE11_FIELDS) else STATE3_FIELDS if s.shape[-1] == len(STATE3_FIELDS) else None
        finite_or_raise(out, names, DivergenceError, 'integrated state')
    return out
