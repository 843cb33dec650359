import numpy as np
from typing import *
from dataclasses import dataclass, replace

from ._helpers import DomainError, no_warnings


__all__ = [
    'MagicFormulaParams',
    'WheelSlip',
    'TireForce',
    'wheel_slip',
    'magic_formula_mu',
    'tire_forces',
]


MF_FIELDS = ('B', 'C', 'D', 'E', 'S_h', 'S_v')


@dataclass(frozen=True)
class MagicFormulaParams:
    """Magic Formula friction-curve coefficients.

    Fields may be scalars or arrays broadcastable against the slip arrays,
    so that a batch of sigma points can carry one parameter set each.
    Defaults are the coefficients identified for the 1:5 scale vehicle on dirt.
    """
    B: float = 1.1559
    C: float = 1.1924
    D: float = 0.9956
    E: float = -0.8505
    S_h: float = -0.0540
    S_v: float = 0.1444

    def __post_init__(self):
        if not np.all(np.asarray(self.D) > 0):
            raise DomainError(f'Magic Formula peak factor D must be positive, got {self.D}')
        if not np.all(np.asarray(self.C) > 0):
            raise DomainError(f'Magic Formula shape factor C must be positive, got {self.C}')

    def scaled(self, friction_scale: float) -> 'MagicFormulaParams':
        "Scale the peak factor, e.g. to emulate a different surface"
        return replace(self, D=self.D * friction_scale)

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in MF_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'MagicFormulaParams':
        "Build from a [..., 6] array ordered (B, C, D, E, S_h, S_v)"
        array = np.asarray(array, dtype=float)
        assert array.shape[-1] == 6, 'expected 6 Magic Formula coefficients'
        return cls(**{name: array[..., i] for i, name in enumerate(MF_FIELDS)})


class WheelSlip(NamedTuple):
    s_x: np.ndarray
    s_y: np.ndarray
    s_total: np.ndarray


class TireForce(NamedTuple):
    f_x: np.ndarray
    f_y: np.ndarray


def wheel_slip(v_tire_x: np.ndarray, v_tire_y: np.ndarray, wheel_omega: np.ndarray, wheel_radius: float, eps: float = 1e-3) -> WheelSlip:
    """Nondimensional slip of a tire contact patch.

    Args:
        v_tire_x (np.ndarray): [...] contact-patch velocity along the wheel heading (m/s)
        v_tire_y (np.ndarray): [...] contact-patch velocity across the wheel heading (m/s)
        wheel_omega (np.ndarray): [...] wheel spin rate (rad/s)
        wheel_radius (float): effective rolling radius (m)
        eps (float): floor on |omega * R| (m/s); the sign of omega * R is kept, zero counts as positive

    Returns:
        WheelSlip: s_x = (v_x - omega R) / (omega R), s_y = v_y / (omega R), s_total = |(s_x, s_y)|
    """
    assert np.all(np.asarray(wheel_radius) > 0), 'wheel_radius must be positive'
    v_tire_x = np.asarray(v_tire_x, dtype=float)
    v_tire_y = np.asarray(v_tire_y, dtype=float)
    rolling = np.asarray(wheel_omega, dtype=float) * wheel_radius
    sign = np.where(rolling < 0, -1.0, 1.0)
    denom = sign * np.maximum(np.abs(rolling), eps)
    s_x = (v_tire_x - rolling) / denom
    s_y = v_tire_y / denom
    return WheelSlip(s_x, s_y, np.hypot(s_x, s_y))


def magic_formula_mu(s_total: np.ndarray, p: MagicFormulaParams = MagicFormulaParams()) -> np.ndarray:
    """Friction coefficient from combined slip.

    mu = D sin(C atan(B S_E - E (B S_E - atan S_E))) + S_v,  S_E = s_total - S_h

    Args:
        s_total (np.ndarray): [...] combined slip, nonnegative
        p (MagicFormulaParams): coefficients, scalar or broadcastable arrays

    Returns:
        np.ndarray: [...] friction coefficient
    """
    s_total = np.asarray(s_total, dtype=float)
    S_E = s_total - p.S_h
    BS = p.B * S_E
    return p.D * np.sin(p.C * np.arctan(BS - p.E * (BS - np.arctan(S_E)))) + p.S_v


@no_warnings()
def tire_forces(slip: WheelSlip, mu: np.ndarray, f_z: np.ndarray, eps: float = 1e-9) -> TireForce:
    """Friction-circle tire force, antiparallel to the slip vector.

    Args:
        slip (WheelSlip): slip quantities
        mu (np.ndarray): [...] friction coefficient
        f_z (np.ndarray): [...] normal load (N), nonnegative
        eps (float): slip magnitude below which the force is exactly zero

    Returns:
        TireForce: f_k = -(s_k / s_total) mu f_z
    """
    f_z = np.asarray(f_z, dtype=float)
    if np.any(f_z < 0):
        raise DomainError(f'negative normal load: {f_z[f_z < 0].min() if f_z.ndim else f_z}')
    sliding = slip.s_total >= eps
    scale = np.where(sliding, -mu * f_z / np.where(sliding, slip.s_total, 1.0), 0.0)
    return TireForce(scale * slip.s_x, scale * slip.s_y)
