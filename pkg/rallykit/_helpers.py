from functools import wraps
from typing import *
import warnings

import numpy as np


__all__ = [
    'RallykitError',
    'DomainError',
    'GeometryError',
    'ConfigError',
    'InsufficientDataError',
    'NumericalError',
    'DivergenceError',
    'no_warnings',
    'finite_or_raise',
]


class RallykitError(Exception):
    "Base class of all errors raised by rallykit"


class DomainError(RallykitError, ValueError):
    "Input outside the domain of a physical model (non-finite state, negative load)"


class GeometryError(RallykitError, ValueError):
    "Inconsistent physical geometry"


class ConfigError(RallykitError, ValueError):
    "Invalid experiment configuration"


class InsufficientDataError(RallykitError, ValueError):
    "Not enough samples to compute the requested quantity"


class NumericalError(RallykitError, ArithmeticError):
    "Linear algebra or optimization failure"


class DivergenceError(NumericalError):
    "Simulation or filter state left its valid range"


def no_warnings(**errstate: str):
    """Decorator silencing numpy floating-point warnings inside numeric kernels whose callers check finiteness themselves.

    Keyword arguments override the default `np.errstate(all='ignore')`, e.g. `no_warnings(over='raise')`.
    """
    errstate = {'all': 'ignore', **errstate}

    def decorator(fn):
        @wraps(fn)
        def wrapper(*args, **kwargs):
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', RuntimeWarning)
                with np.errstate(**errstate):
                    return fn(*args, **kwargs)
        return wrapper
    return decorator


def finite_or_raise(x: np.ndarray, names: Sequence[str] = None, error: Type[Exception] = DomainError, what: str = 'state'):
    """Raise `error` naming the first non-finite component of `x` ([..., n]).

    Args:
        x (np.ndarray): [..., n] array to check
        names (Sequence[str], optional): component names along the last axis
        error (Type[Exception]): exception class to raise
        what (str): noun used in the message
    """
    x = np.asarray(x)
    bad = ~np.isfinite(x)
    if not bad.any():
        return
    if x.ndim == 0:
        raise error(f'non-finite {what}: {x}')
    component = int(np.argwhere(bad.reshape(-1, x.shape[-1]))[0, 1])
    label = names[component] if names is not None and component < len(names) else f'#{component}'
    raise error(f'non-finite {what} component {label}')
