"""Modified Bessel functions of the first kind and the constant-coefficient kernel.

For ``c(x, t) = c2(t)`` and ``f = 0`` the kernel equation has the closed form

    k(x, y) = lambda0 * x * I1(z) / z,    z = sqrt(lambda0 * (x**2 - y**2)),

and the feedback gain ``k_x(1, y) = lambda0 I1(s)/s + lambda0 I2(s)/(1 - y**2)``
with ``s = sqrt(lambda0 (1 - y**2))``.  These serve as ground truth for the
numerical solver once the kernel formula itself passes the residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import DomainError

# below this argument the quotients I1(s)/s and I2(s)/s**2 are taken from
# their Taylor expansions to avoid 0/0
_SMALL = 1e-6


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    value: float
    terms_used: int


def bessel_series(order: int, s: float, rel_tol: float = 1e-17, max_terms: int = 500) -> BesselEval:
    """Power series ``sum_m (s/2)**(2m+order) / (m! (m+order)!)``.

    Summation stops once a term drops below ``rel_tol`` times the partial sum.
    """
    if order not in (1, 2):
        raise ValueError("only orders 1 and 2 are supported")
    if not s >= 0:
        raise DomainError(f"bessel_I needs s >= 0, got {s}")
    if s == 0.0:
        return BesselEval(order, 0.0, 0.0, 1)
    half = 0.5 * s
    term = half**order / math.factorial(order)
    total = term
    q = half * half
    m = 0
    while m < max_terms:
        m += 1
        term *= q / (m * (m + order))
        total += term
        if term < rel_tol * total:
            break
    return BesselEval(order, float(s), total, m + 1)


def bessel_I(order: int, s: float) -> float:
    return bessel_series(order, s).value


def _i1_over_s(s: float) -> float:
    if s < _SMALL:
        return 0.5 + s * s / 16.0
    return bessel_I(1, s) / s


def _i2_over_s2(s: float) -> float:
    if s < _SMALL:
        return 0.125 + s * s / 96.0
    return bessel_I(2, s) / (s * s)


def closed_form_gain(lambda0: float, y: float) -> float:
    """``k_x(1, y)`` for the constant-coefficient case."""
    if lambda0 < 0:
        raise ValueError("lambda0 must be nonnegative")
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"y = {y} outside [0, 1]")
    if lambda0 == 0.0:
        return 0.0
    s = math.sqrt(lambda0 * (1.0 - y * y))
    # lambda0 * I2(s) / (1 - y^2) = lambda0**2 * I2(s) / s**2
    return lambda0 * _i1_over_s(s) + lambda0 * lambda0 * _i2_over_s2(s)


def closed_form_kernel(lambda0: float, x: float, y: float) -> float:
    if lambda0 < 0:
        raise ValueError("lambda0 must be nonnegative")
    if not (0.0 <= y <= x <= 1.0):
        raise DomainError(f"(x, y) = ({x}, {y}) is outside 0 <= y <= x <= 1")
    if lambda0 == 0.0:
        return 0.0
    z = math.sqrt(lambda0 * max(x * x - y * y, 0.0))
    return lambda0 * x * _i1_over_s(z)


def closed_form_kernel_grid(lambda0: float, X, Y):
    """Vectorised :func:`closed_form_kernel`; NaN where ``y > x``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = np.full(np.broadcast(X, Y).shape, np.nan)
    Xb, Yb = np.broadcast_arrays(X, Y)
    for idx in np.ndindex(out.shape):
        x, y = float(Xb[idx]), float(Yb[idx])
        if y <= x:
            out[idx] = closed_form_kernel(lambda0, x, y)
    return out


def closed_form_gain_grid(lambda0: float, ys) -> np.ndarray:
    return np.array([closed_form_gain(lambda0, float(y)) for y in np.asarray(ys, dtype=float)])
