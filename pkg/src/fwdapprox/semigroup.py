"""Left-shift semigroup on curves and its exact action on coefficients.

Coefficient-space shifting is the normative implementation: the truncated
span is invariant under the shift, each mode is scaled by e^{lambda_n t} and
the constant picks up sum_n c_n g_n(t).  Grid shifting of sampled curves is
kept for the fine-grid oracle.
"""
from __future__ import annotations

import numpy as np

from .basis import BasisParams, eval_g_n, lambda_n
from .errors import DomainTooShort
from .projection import CoeffState
from .space import Curve

__all__ = ["shift_curve", "shift_coeffs", "adjoint_on_dual"]


def shift_curve(f: Curve, t: float, x_max_out: float | None = None) -> Curve:
    """(shift_t f)(x) = f(t + x), cubic interpolation at off-grid t."""
    if t < 0.0:
        raise ValueError("shift time must be nonnegative")
    if x_max_out is None:
        x_max_out = f.x_max - t
    if t + x_max_out > f.x_max + 1e-9:
        raise DomainTooShort(
            f"shift by {t} needs the curve on [0, {t + x_max_out}], has [0, {f.x_max}]")
    n = int(round(x_max_out / f.grid_step)) + 1
    m = t / f.grid_step
    if abs(m - round(m)) < 1e-9:
        # on-grid shift: slice the samples, integrate the skipped prefix
        m = int(round(m))
        d = f.deriv_samples
        if m == 0:
            head = 0.0
        else:
            head = np.trapezoid(d[:m + 1], dx=f.grid_step)
        return Curve(complex(f.value_at_zero + head), d[m:m + n],
                     x_max_out / (n - 1), x_max_out)
    x = np.linspace(0.0, x_max_out, n)
    return Curve(complex(f.value(t)), f.deriv(t + x), x_max_out / (n - 1), x_max_out)


def shift_coeffs(s: CoeffState, t: float) -> CoeffState:
    """Exact shift action on a coefficient state."""
    if t < 0.0:
        raise ValueError("shift time must be nonnegative")
    p = s.params
    ns = p.n_range(s.k)
    g_t = eval_g_n(p, ns, np.array([float(t)]))[:, 0]
    c_star = s.c_star + np.sum(s.c * g_t)
    c = s.c * np.exp(lambda_n(p, ns) * t)
    return CoeffState(complex(c_star), c, p)


def adjoint_on_dual(params: BasisParams, n: int, t: float) -> complex:
    """Eigenvalue e^{conj(lambda_n) t} of the adjoint shift on the dual element."""
    if t < 0.0:
        raise ValueError("shift time must be nonnegative")
    return complex(np.exp(np.conj(lambda_n(params, n)) * t))
