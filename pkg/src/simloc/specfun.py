"""Special functions behind the moment formulas.

All functions accept scalars or ``numpy`` arrays in ``z``/``x`` and return the
matching shape (a Python float for scalar input).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import DomainError

__all__ = [
    "MomentOrder",
    "erf",
    "lgamma",
    "gamma",
    "kummer_1f1",
    "hermite",
    "f_q_closed",
    "f_q_pow2_coeff",
    "f_q_tilde",
]

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class MomentOrder:
    """Moment order ``q > 1``; the integer path needs ``q in {2, 3, ...}``."""

    q: float

    def __post_init__(self):
        if not math.isfinite(self.q) or self.q <= 1:
            raise DomainError(f"moment order must satisfy q > 1, got {self.q}")

    @property
    def is_integer(self) -> bool:
        return float(self.q).is_integer() and self.q >= 2


def _out(x, scalar):
    return float(x) if scalar else x


def erf(x):
    """Error function (odd, saturates at +-1)."""
    scalar = np.ndim(x) == 0
    return _out(_sp.erf(np.asarray(x, dtype=float)), scalar)


# Lanczos approximation, g = 7, nine coefficients.
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def lgamma(x: float) -> float:
    """log|Gamma(x)| via the Lanczos approximation (reflection below 1/2)."""
    x = float(x)
    if x <= 0 and x.is_integer():
        raise DomainError(f"lgamma has a pole at {x}")
    if x < 0.5:
        return math.log(math.pi / abs(math.sin(math.pi * x))) - lgamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(acc)


def gamma(x: float) -> float:
    """Gamma function for real non-pole arguments."""
    x = float(x)
    if x <= 0 and x.is_integer():
        raise DomainError(f"gamma has a pole at {x}")
    val = math.exp(lgamma(x))
    if x < 0 and math.floor(x) % 2 == 1:
        val = -val
    return val


def _rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles."""
    if x <= 0 and float(x).is_integer():
        return 0.0
    return 1.0 / gamma(x)


_SERIES_MAX = 300.0
_OVERFLOW_MAX = 700.0


def _series(a: float, b: float, x: np.ndarray) -> np.ndarray:
    """Plain Maclaurin series of 1F1; caller guarantees it is well conditioned."""
    term = np.ones_like(x)
    total = np.ones_like(x)
    terminating = a <= 0 and float(a).is_integer()
    kmax = int(-a) + 1 if terminating else 100_000
    for k in range(kmax):
        term = term * ((a + k) / ((b + k) * (k + 1.0))) * x
        total = total + term
        if not terminating and k > abs(a) and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _asymptotic_negative(a: float, b: float, big: np.ndarray) -> np.ndarray:
    """1F1(a; b; -X) for large X > 0: the algebraic branch, truncated at its
    smallest term (the exponentially small branch is dropped)."""
    pref = gamma(b) * _rgamma(b - a)
    out = np.empty_like(big)
    for i, X in enumerate(big):
        term = total = 1.0
        for k in range(500):
            nxt = term * (a + k) * (1.0 + a - b + k) / ((k + 1.0) * X)
            if k > 0 and abs(nxt) >= abs(term):
                break
            total += nxt
            term = nxt
            if abs(term) <= 1e-17 * abs(total):
                break
        out[i] = pref * X ** (-a) * total
    return out


def _exp_times_polynomial(a: float, b: float, big: np.ndarray) -> np.ndarray:
    """exp(-X) 1F1(a; b; X) for a non-positive integer ``a``.

    Summed term by term in log space once exp(-X) would underflow while the
    polynomial overflows.
    """
    out = np.empty_like(big)
    mod = big <= _SERIES_MAX
    if mod.any():
        out[mod] = np.exp(-big[mod]) * _series(a, b, big[mod])
    if (~mod).any():
        xb = big[~mod]
        logx = np.log(xb)
        total = np.zeros_like(xb)
        logc = 0.0
        sign = 1.0
        for k in range(int(-a) + 1):
            total += sign * np.exp(logc + k * logx - xb)
            r = (a + k) / ((b + k) * (k + 1.0))
            if r == 0:
                break
            sign *= math.copysign(1.0, r)
            logc += math.log(abs(r))
        out[~mod] = total
    return out


def kummer_1f1(a: float, b: float, x):
    """Kummer confluent hypergeometric function 1F1(a; b; x), real arguments.

    Regimes:

    * ``x >= 0``: direct series, ``x <= 700``.
    * ``x < 0`` with ``b - a`` a non-positive integer: Kummer transform to a
      terminating polynomial (exact up to rounding for any ``x``).
    * ``-300 <= x < 0``: Kummer transform ``e**x * 1F1(b - a; b; -x)`` summed
      as a positive-argument series, avoiding the alternating one.
    * ``x < -300``: large-argument asymptotic expansion.

    ``b`` must be positive.
    """
    a = float(a)
    b = float(b)
    if b <= 0:
        raise DomainError(f"kummer_1f1: regime b <= 0 (b={b}) is not supported")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise DomainError("kummer_1f1: non-finite argument")
    out = np.empty_like(x)
    pos = x >= 0
    if pos.any():
        if np.max(x[pos]) > _OVERFLOW_MAX:
            raise DomainError(f"kummer_1f1: regime x > {_OVERFLOW_MAX} overflows")
        out[pos] = _series(a, b, x[pos])
    neg = ~pos
    if neg.any():
        big = -x[neg]
        ba = b - a
        if ba <= 0 and ba.is_integer():
            out[neg] = _exp_times_polynomial(ba, b, big)
        else:
            res = np.empty_like(big)
            small = big <= _SERIES_MAX
            if small.any():
                res[small] = np.exp(-big[small]) * _series(ba, b, big[small])
            if (~small).any():
                res[~small] = _asymptotic_negative(a, b, big[~small])
            out[neg] = res
    return _out(out[0], True) if scalar else out


def hermite(n: int, z):
    """Physicists' Hermite polynomial H_n by the three-term recurrence."""
    if n < 0:
        raise DomainError("Hermite degree must be non-negative")
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    h_prev = np.ones_like(z)
    if n == 0:
        return _out(h_prev, scalar)
    h = 2.0 * z
    for k in range(1, n):
        h_prev, h = h, 2.0 * z * h - 2.0 * k * h_prev
    return _out(h, scalar)


def _integer_q(q) -> int:
    if not float(q).is_integer() or q < 2:
        raise DomainError(f"closed-form kernel needs integer q >= 2, got {q}")
    return int(q)


def f_q_closed(q: int, z):
    """Integer-q kernel: integral of y**(2q-2) exp(-y**2) cos(2 z y) over R.

    Written as sqrt(pi) exp(-z**2) (-1/4)**(q-1) H_{2q-2}(z).
    """
    m = _integer_q(q) - 1
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    val = SQRT_PI * np.exp(-z * z) * (-0.25) ** m * hermite(2 * m, z)
    return _out(val, scalar)


def f_q_pow2_coeff(q: int, z):
    """The kernel with a ``2**p`` coefficient in the finite sum.

    Kept only so the self-test can show how far it is from the Gaussian
    integral it is meant to equal; nothing else uses it.
    """
    m = _integer_q(q) - 1
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for p in range(m + 1):
        c = math.factorial(2 * m) / (math.factorial(p) * math.factorial(2 * m - 2 * p))
        total = total + 2.0**p * (-z * z) ** (m - p) * c
    return _out(SQRT_PI * np.exp(-z * z) * total, scalar)


def f_q_tilde(q: float, z):
    """Real-q kernel Gamma(q - 1/2) 1F1(q - 1/2; 1/2; -z**2), ``q > 1``."""
    order = MomentOrder(q)
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    a = order.q - 0.5
    val = gamma(a) * kummer_1f1(a, 0.5, -(z * z))
    if scalar:
        return float(np.asarray(val).ravel()[0])
    return np.asarray(val).reshape(z.shape)
