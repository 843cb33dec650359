import logging
from typing import *
from dataclasses import dataclass

import numpy as np
from scipy import fft, signal

from ._helpers import GeometryError, InsufficientDataError


__all__ = [
    'BifilarSetup',
    'oscillation_period',
    'bifilar_moi',
    'moi_table',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BifilarSetup:
    """Bifilar pendulum geometry.

    m: suspended mass (kg); R_1, R_2: wire attachment distances from the CG (m);
    d: wire length (m); g: gravity (m/s^2).
    """
    m: float
    R_1: float
    R_2: float
    d: float
    g: float = 9.81

    def __post_init__(self):
        for name in ('m', 'R_1', 'R_2', 'd', 'g'):
            if not getattr(self, name) > 0:
                raise GeometryError(f'bifilar {name} must be positive, got {getattr(self, name)}')
        if self.d ** 2 < (self.R_1 - self.R_2) ** 2:
            raise GeometryError(f'wire length {self.d} shorter than the attachment offset {abs(self.R_1 - self.R_2)}')

    @classmethod
    def symmetric(cls, m: float, b: float, d: float, g: float = 9.81) -> 'BifilarSetup':
        "Both wires at distance b from the CG"
        return cls(m=m, R_1=b, R_2=b, d=d, g=g)

    @property
    def height(self) -> float:
        "Vertical distance between the suspension points and the attachment points"
        return float(np.sqrt(self.d ** 2 - (self.R_1 - self.R_2) ** 2))


def _coarse_frequency(x: np.ndarray, sample_rate: float) -> float:
    spectrum = np.abs(fft.rfft(x * signal.windows.hann(len(x))))
    freqs = fft.rfftfreq(len(x), 1 / sample_rate)
    spectrum[0] = 0
    return float(freqs[np.argmax(spectrum)])


def oscillation_period(angle_samples: np.ndarray, sample_rate: float, n_periods: int = 60, lowpass: bool = True) -> float:
    """Mean oscillation period of a pendulum angle record.

    Upward zero crossings of the mean-removed signal are located by linear
    interpolation between samples; the mean period is the span of the first
    `n_periods` periods divided by `n_periods`. A crossing is accepted only
    half a period after the previous one, and the record is low-pass filtered
    with a zero-phase Butterworth filter at four times the dominant frequency.

    Args:
        angle_samples (np.ndarray): [N] angle (rad), uniformly sampled
        sample_rate (float): Hz
        n_periods (int): number of periods to average
        lowpass (bool): apply the zero-phase low-pass filter

    Returns:
        float: mean period (s)
    """
    x = np.asarray(angle_samples, dtype=float)
    assert x.ndim == 1, 'angle_samples must be one-dimensional'
    assert sample_rate > 0 and n_periods >= 1
    if len(x) < 4:
        raise InsufficientDataError(f'only {len(x)} samples')
    x = x - x.mean()
    f0 = _coarse_frequency(x, sample_rate)
    if f0 <= 0:
        raise InsufficientDataError('no oscillation found in the record')

    cutoff = 4 * f0 / (sample_rate / 2)
    if lowpass and cutoff < 1 and len(x) > 30:
        b, a = signal.butter(4, cutoff)
        x = signal.filtfilt(b, a, x)
        x = x - x.mean()

    idx = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    times = (idx + x[idx] / (x[idx] - x[idx + 1])) / sample_rate
    dead_time = 0.5 / f0
    crossings = []
    for t in times:
        if not crossings or t - crossings[-1] >= dead_time:
            crossings.append(t)
    if len(crossings) < n_periods + 1:
        raise InsufficientDataError(f'found {max(len(crossings) - 1, 0)} periods, need {n_periods}')
    T = (crossings[n_periods] - crossings[0]) / n_periods
    logger.debug(f'period {T:.6f} s from {n_periods} periods (coarse {1 / f0:.4f} s)')
    return float(T)


def bifilar_moi(setup: BifilarSetup, T: float) -> float:
    """Moment of inertia of a body hung from two parallel wires.

    I = m g R_1 R_2 T^2 / (4 pi^2 h),  h = sqrt(d^2 - (R_1 - R_2)^2)

    Args:
        setup (BifilarSetup): pendulum geometry
        T (float): oscillation period (s)

    Returns:
        float: moment of inertia about the vertical axis through the CG (kg m^2)
    """
    assert T >= 0, 'period must be nonnegative'
    return setup.m * setup.g * setup.R_1 * setup.R_2 * T ** 2 / (4 * np.pi ** 2 * setup.height)


def moi_table(setups: Mapping[str, BifilarSetup], periods: Mapping[str, float]) -> Dict[str, float]:
    "Moments of inertia for several named axes"
    missing = set(setups) - set(periods)
    if missing:
        raise InsufficientDataError(f'no period for axes {sorted(missing)}')
    return {axis: bifilar_moi(setup, periods[axis]) for axis, setup in setups.items()}
