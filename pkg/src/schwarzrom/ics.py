"""Initial displacement fields for the wave-propagation experiments."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

SYMMETRIC_GAUSSIAN = "symmetric_gaussian"
ROUNDED_SQUARE = "rounded_square"


def ic_symmetric_gaussian(x, a: float, b: float, s: float):
    """Half-amplitude Gaussian bump centered at b with width s."""
    if s <= 0.0:
        raise ConfigurationError("gaussian width must be positive")
    x = np.asarray(x, dtype=float)
    return 0.5 * a * np.exp(-((x - b) ** 2) / (2.0 * s * s))


def ic_rounded_square(x, a: float, b: float, s: float):
    """Plateau with tanh-rounded shoulders at x = s and x = 1 - s."""
    x = np.asarray(x, dtype=float)
    return a * (np.tanh(-b * (x - s)) + np.tanh(b * (x - 1.0 + s)))


def make_initial_condition(kind: str, a: float, b: float, s: float):
    """Bind IC parameters into a nodal evaluation function of x."""
    if kind == SYMMETRIC_GAUSSIAN:
        return lambda x: ic_symmetric_gaussian(x, a, b, s)
    if kind == ROUNDED_SQUARE:
        return lambda x: ic_rounded_square(x, a, b, s)
    raise ConfigurationError(f"unknown initial condition kind {kind!r}")
