"""L1 discretisation of the Caputo derivative and a quadrature reference.

On a uniform mesh with step ``s`` the L1 scheme approximates

    D^a f(t_n) ~ s^-a * sum_{k=0}^{n-1} b_k (f_{n-k} - f_{n-k-1}),
    b_k = ((k+1)^(1-a) - k^(1-a)) / Gamma(2-a),

with positive, strictly decreasing weights for 0 < a < 1.  At ``a = 1`` the
operator is the backward difference ``(f_n - f_{n-1}) / s``.  The same kernel
serves the time derivative and the space derivative taken from the left end
of the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .core import FractionalOrder, as_order

__all__ = [
    "L1Weights",
    "QuadratureError",
    "build_weights",
    "l1_increments",
    "caputo_l1_at",
    "caputo_l1_all",
    "caputo_quad_oracle",
]


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate {estimate!r}, error bound {error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class L1Weights:
    order: FractionalOrder
    step: float
    weights: np.ndarray = field(repr=False)
    scale: float
    backward_difference: bool

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def b0(self) -> float:
        return float(self.weights[0])

    @property
    def diagonal(self) -> float:
        """Coefficient of the newest sample, ``scale * b_0``."""
        return self.scale * self.b0


def l1_increments(alpha: float, K: int) -> np.ndarray:
    """``(k+1)^(1-alpha) - k^(1-alpha)`` for k = 0..K-1, computed stably."""
    k = np.arange(K, dtype=float)
    out = np.empty(K)
    out[0] = 1.0
    if K > 1:
        kk = k[1:]
        # k^(1-a) * ((1 + 1/k)^(1-a) - 1) avoids cancellation for large k
        out[1:] = np.exp((1.0 - alpha) * np.log(kk)) * np.expm1((1.0 - alpha) * np.log1p(1.0 / kk))
    return out


def build_weights(order, step: float, K: int) -> L1Weights:
    order = as_order(order)
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K!r}")
    alpha = order.value
    if alpha == 1.0:
        w = np.zeros(K)
        w[0] = 1.0
        w.setflags(write=False)
        return L1Weights(order, float(step), w, 1.0 / step, True)
    w = l1_increments(alpha, K) * math.exp(-gammaln(2.0 - alpha))
    w.setflags(write=False)
    return L1Weights(order, float(step), w, float(step) ** (-alpha), False)


def caputo_l1_at(samples, weights: L1Weights, n: int) -> float:
    f = np.asarray(samples, dtype=float)
    if not 1 <= n < len(f):
        raise IndexError(f"index {n} outside 1..{len(f) - 1}")
    if weights.backward_difference:
        return float((f[n] - f[n - 1]) / weights.step)
    if len(weights) < n:
        raise IndexError(f"weight table of length {len(weights)} too short for index {n}")
    # differences newest-first, so a constant array gives exactly zero
    diffs = np.diff(f[: n + 1])[::-1]
    return float(weights.scale * np.dot(weights.weights[:n], diffs))


def caputo_l1_all(samples, weights: L1Weights) -> np.ndarray:
    """L1 derivative at every index 1..N (entry 0 is set to 0)."""
    f = np.asarray(samples, dtype=float)
    out = np.zeros(len(f))
    for n in range(1, len(f)):
        out[n] = caputo_l1_at(f, weights, n)
    return out


def _derivative(f: Callable[[float], float], s: float, h: float, lo: float, hi: float) -> float:
    # fourth-order differences, one-sided near the ends of [lo, hi]
    if s - 2 * h >= lo and s + 2 * h <= hi:
        return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12 * h)
    if s - 2 * h < lo:
        return (-25 * f(s) + 48 * f(s + h) - 36 * f(s + 2 * h) + 16 * f(s + 3 * h) - 3 * f(s + 4 * h)) / (12 * h)
    return (25 * f(s) - 48 * f(s - h) + 36 * f(s - 2 * h) - 16 * f(s - 3 * h) + 3 * f(s - 4 * h)) / (12 * h)


def caputo_quad_oracle(
    f: Callable[[float], float],
    order,
    t: float,
    tol: float = 1e-10,
    df: Callable[[float], float] | None = None,
) -> float:
    """Caputo derivative of ``f`` at ``t`` by adaptive quadrature of its definition.

    The integrand ``(t - s)^-a f'(s)`` has an algebraic endpoint singularity,
    which is handled exactly by QUADPACK's ``alg`` weight.  ``f'`` is taken
    from ``df`` when given, otherwise from fourth-order finite differences.
    Intended as an independent test oracle, not for production use.
    """
    alpha = as_order(order).value
    if alpha == 1.0:
        if df is not None:
            return float(df(t))
        return _derivative(f, t, 1e-4 * max(1.0, abs(t)), 0.0, t)
    if t == 0:
        return 0.0
    if t < 0:
        raise ValueError("t must be non-negative")
    if df is None:
        h = 1e-3 * t
        deriv = lambda s: _derivative(f, s, h, 0.0, t)  # noqa: E731
    else:
        deriv = df
    value, err = integrate.quad(
        deriv, 0.0, t, weight="alg", wvar=(0.0, -alpha), epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=200
    )
    if not np.isfinite(value) or err > tol * max(1.0, abs(value)):
        raise QuadratureError("Caputo quadrature did not converge", value, err)
    return float(value * math.exp(-gammaln(1.0 - alpha)))
