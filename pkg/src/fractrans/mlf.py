"""Real two-parameter Mittag-Leffler function E_{a,b}(z) = sum_k z^k / Gamma(a k + b).

Routes, chosen per argument:

* ``z == 0``: ``1 / Gamma(b)``.
* ``a == 1/2, b == 1``: ``erfcx(-z)``, i.e. ``exp(z^2) erfc(-z)``.
* Taylor series with compensated (``math.fsum``) summation when the terms do
  not cancel badly: always for ``z >= 0``; for ``z < 0`` only while
  ``|z| <= Z_SWITCH`` and the largest term stays small against the sum.
* ``z < 0``, ``0 < a < 1``, ``b == 1``: the Laplace-type representation

      E_a(-x) = int_0^inf exp(-r x^(1/a)) K_a(r) dr,
      K_a(r) = sin(a pi) r^(a-1) / (pi (r^(2a) + 2 r^a cos(a pi) + 1)),

  integrated with QUADPACK.

Anything else raises :class:`MittagLefflerRangeError`.  The supported range
covers ``|z| <= 50`` for ``0.2 <= a <= 1`` whenever the value is representable
(for ``z > 0`` and small ``a`` it overflows a double long before 50).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import erfcx, gammaln, rgamma

__all__ = [
    "Z_SWITCH",
    "TERM_CAP",
    "MittagLefflerRangeError",
    "mittag_leffler",
    "ml_time_solution",
    "ml_space_solution",
]

Z_SWITCH = 5.0
TERM_CAP = 400
# positive arguments need more terms before the series turns over
POSITIVE_TERM_CAP = 20000
_CANCELLATION_LIMIT = 1e-13


class MittagLefflerRangeError(ValueError):
    pass


def _series(alpha: float, beta: float, z: float, cap: int):
    """Partial sums of the power series; returns (value, largest |term|) or None."""
    k = np.arange(cap, dtype=float)
    args = alpha * k + beta
    if z == 0:
        return float(rgamma(beta)), abs(float(rgamma(beta)))
    logmag = k * math.log(abs(z)) - gammaln(args)
    # 1/Gamma changes sign only at non-positive arguments, which beta > 0 excludes
    sign = np.where((z < 0) & (k % 2 == 1), -1.0, 1.0)
    if np.max(logmag) > 700:
        raise MittagLefflerRangeError(f"series terms overflow for z={z}, alpha={alpha}")
    terms = sign * np.exp(logmag)
    big = float(np.max(np.abs(terms)))
    # converged once the tail is negligible and terms are shrinking
    tail = np.abs(terms[-5:])
    if tail.max() > 1e-17 * big or terms[-1] != 0 and abs(terms[-1]) > abs(terms[-2]):
        return None
    return math.fsum(terms.tolist()), big


def _laplace_kernel_value(alpha: float, x: float) -> float:
    s, c = math.sin(alpha * math.pi), math.cos(alpha * math.pi)
    rate = x ** (1.0 / alpha)

    def smooth(r):
        ra = r**alpha
        return math.exp(-r * rate) * s / (math.pi * (ra * ra + 2.0 * ra * c + 1.0))

    # r^(alpha-1) singularity at 0 handled by the algebraic weight
    head, err1 = integrate.quad(smooth, 0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=0, epsrel=1e-13, limit=200)

    def tail_integrand(r):
        return smooth(r) * r ** (alpha - 1.0)

    tail, err2 = integrate.quad(tail_integrand, 1.0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    value = head + tail
    if not math.isfinite(value) or (err1 + err2) > 1e-11 * abs(value):
        raise MittagLefflerRangeError(
            f"integral representation did not reach 1e-11 accuracy for alpha={alpha}, z={-x} "
            f"(value {value!r}, error {err1 + err2!r})"
        )
    return value


def mittag_leffler(alpha: float, beta: float = 1.0, z: float = 0.0) -> float:
    alpha, beta, z = float(alpha), float(beta), float(z)
    if not alpha > 0:
        raise MittagLefflerRangeError(f"alpha must be positive, got {alpha}")
    if not beta > 0:
        raise MittagLefflerRangeError(f"only beta > 0 is supported, got {beta}")
    if not math.isfinite(z):
        raise MittagLefflerRangeError(f"z must be finite, got {z}")
    if z == 0.0:
        return 1.0 if beta == 1.0 else float(rgamma(beta))
    if alpha == 0.5 and beta == 1.0:
        value = float(erfcx(-z))
        if not math.isfinite(value):
            raise MittagLefflerRangeError(f"E_1/2({z}) overflows")
        return value

    if z > 0:
        if alpha <= 2 and z ** (1.0 / alpha) > 700:
            raise MittagLefflerRangeError(f"E_{alpha},{beta}({z}) overflows a double")
        # terms peak near k ~ z^(1/alpha) / alpha
        cap = max(TERM_CAP, int(3.0 * z ** (1.0 / alpha) / alpha) + 60)
        if cap > POSITIVE_TERM_CAP:
            raise MittagLefflerRangeError(f"series for z={z}, alpha={alpha} needs more than {POSITIVE_TERM_CAP} terms")
        res = _series(alpha, beta, z, cap)
        if res is None:
            raise MittagLefflerRangeError(f"series did not converge within {cap} terms for z={z}")
        return res[0]

    if -z <= Z_SWITCH:
        res = _series(alpha, beta, z, TERM_CAP)
        if res is not None:
            value, big = res
            if big * 1e-16 * 4 <= _CANCELLATION_LIMIT * abs(value):
                return value
    if beta == 1.0 and alpha < 1.0:
        return _laplace_kernel_value(alpha, -z)
    if beta == 1.0 and alpha == 1.0:
        return math.exp(z)
    raise MittagLefflerRangeError(
        f"E_{alpha},{beta}({z}) is outside the supported range (negative z beyond the series "
        f"range needs 0 < alpha <= 1 and beta = 1)"
    )


def ml_time_solution(alpha: float, r: float, a0: float, t: float) -> float:
    """Exact solution ``a0 * E_alpha(r t^alpha)`` of ``D_t^alpha u = r u, u(0) = a0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return float(a0)
    return float(a0) * mittag_leffler(alpha, 1.0, r * t**alpha)


def ml_space_solution(beta: float, lam: float, g0: float, x: float) -> float:
    """Exact solution ``g0 * E_beta(lam x^beta)`` of ``D_x^beta u = lam u, u(0) = g0``."""
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return float(g0)
    return float(g0) * mittag_leffler(beta, 1.0, lam * x**beta)
