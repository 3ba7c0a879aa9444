"""Reference curves used by experiments, demos and the test-suite.

The bump curve is the designated twice-differentiable datum for truncation
rate studies: its derivative is a compactly supported C^1 polynomial bump, so
coefficients decay fast and the 1/k rate bound holds with a wide margin.
"""
from __future__ import annotations

import numpy as np

from .space import DEFAULT_POINTS, Curve

__all__ = ["smooth_bump", "exp_loading", "seasonal_curve", "flat_curve"]


def smooth_bump(value_at_zero: float = 1.0, center: float = 0.4,
                width: float = 0.3, x_max: float = 2.0,
                n_points: int = DEFAULT_POINTS) -> Curve:
    """Curve with derivative (1 - u^2)^2 on |u| < 1, u = (x - center)/width.

    The derivative is C^1 with compact support, so the curve itself is C^2.
    """
    def d(x):
        u = (x - center) / width
        return np.where(np.abs(u) < 1.0, (1.0 - u**2) ** 2, 0.0)

    return Curve.from_deriv_fn(d, value_at_zero, x_max=x_max, n_points=n_points)


def exp_loading(scale: float = 0.1, rate: float = 1.0, x_max: float = 2.0,
                n_points: int = DEFAULT_POINTS) -> Curve:
    """Exponentially decaying factor loading scale * e^{-rate x}."""
    def d(x):
        return -rate * scale * np.exp(-rate * x)

    return Curve.from_deriv_fn(d, scale, x_max=x_max, n_points=n_points)


def seasonal_curve(level: float = 1.0, amplitude: float = 0.2,
                   period: float = 1.0, damp: float = 1.0, x_max: float = 2.0,
                   n_points: int = DEFAULT_POINTS) -> Curve:
    """Damped seasonal oscillation around a level; smooth on all of [0, x_max]."""
    w = 2.0 * np.pi / period

    def d(x):
        e = np.exp(-damp * x)
        return amplitude * e * (w * np.cos(w * x) - damp * np.sin(w * x))

    return Curve.from_deriv_fn(d, level, x_max=x_max, n_points=n_points)


def flat_curve(level: float = 1.0, x_max: float = 2.0,
               n_points: int = DEFAULT_POINTS) -> Curve:
    """Constant curve (zero derivative)."""
    return Curve.from_deriv_fn(lambda x: np.zeros_like(x), level,
                               x_max=x_max, n_points=n_points)
