"""Deterministic adaptive Gauss-Kronrod quadrature in one to three dimensions.

Integrands are vectorized: they receive a 1-D ``numpy`` array of abscissae and
return an array of the same length.  Infinite ranges are mapped onto finite
ones with ``x = t / (1 - t**2)``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrandError, UnsupportedDimensionError

__all__ = [
    "QuadratureResult",
    "integrate_1d",
    "integrate_2d",
    "integrate_nd",
]

# Kronrod 15-point abscissae (non-negative half) and weights, with the
# embedded 7-point Gauss weights at the odd positions.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

DEFAULT_MAX_EVALS = 1_000_000


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool

    def __float__(self) -> float:
        return self.value


def _phi(t):
    return t / (1.0 - t * t)


def _dphi(t):
    tt = t * t
    return (1.0 + tt) / (1.0 - tt) ** 2


def _phi_inv(x: float) -> float:
    return 2.0 * x / (1.0 + math.sqrt(1.0 + 4.0 * x * x))


class _Mapped:
    """Integrand on a finite parameter interval, Jacobian included."""

    def __init__(self, f, a: float, b: float):
        self.f = f
        if math.isinf(a) and math.isinf(b):
            self.kind = "both"
            self.lo, self.hi = -1.0, 1.0
        elif math.isinf(b):
            self.kind = "upper"
            self.shift = a
            self.lo, self.hi = 0.0, 1.0
        elif math.isinf(a):
            self.kind = "lower"
            self.shift = b
            self.lo, self.hi = 0.0, 1.0
        else:
            self.kind = "finite"
            self.lo, self.hi = a, b

    def to_param(self, x: float) -> float:
        if self.kind == "finite":
            return x
        if self.kind == "both":
            return _phi_inv(x)
        if self.kind == "upper":
            return _phi_inv(x - self.shift)
        return _phi_inv(self.shift - x)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "finite":
            x = t
            jac = None
        elif self.kind == "both":
            x = _phi(t)
            jac = _dphi(t)
        elif self.kind == "upper":
            x = self.shift + _phi(t)
            jac = _dphi(t)
        else:
            x = self.shift - _phi(t)
            jac = _dphi(t)
        y = np.asarray(self.f(x), dtype=float)
        bad = ~np.isfinite(y)
        if bad.any():
            flat = int(np.argmax(bad.ravel()))
            xi = float(x[flat % x.size])
            raise IntegrandError(f"integrand returned {y.ravel()[flat]} at x={xi!r}", abscissa=xi)
        if jac is not None:
            y = y * jac
        return y


_EPS = np.finfo(float).eps


def _gk15(g, lo: float, hi: float):
    """One Gauss-Kronrod 7/15 panel; returns (values, |K15 - G7|) per row."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    y = g(mid + half * NODES)
    k = half * (y @ KRONROD_WEIGHTS)
    err = np.abs(half * (y @ GAUSS_WEIGHTS) - k)
    return k, err


def _adapt(g, edges: Sequence[float], rel_tol: float, abs_tol: float,
           max_evals: int):
    """Global adaptive bisection over ``edges``; ``g`` may return extra rows.

    Refinement is driven by row 0.  Returns totals per row, the row-0 error
    estimate, evaluation count and a convergence flag.
    """
    heap = []
    evals = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        k, e = _gk15(g, lo, hi)
        evals += 15
        heapq.heappush(heap, (-float(np.ravel(e)[0]), lo, hi, k, e))

    def totals():
        ks = [np.ravel(item[3]) for item in heap]
        es = [float(np.ravel(item[4])[0]) for item in heap]
        value = np.array([math.fsum(col) for col in zip(*ks)]) if ks else np.zeros(1)
        return value, math.fsum(es)

    value, err = totals()
    frozen = []
    while True:
        if err <= max(abs_tol, rel_tol * abs(value[0])):
            converged = True
            break
        if evals + 30 > max_evals or not heap:
            converged = False
            break
        neg_e, lo, hi, k, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or (hi - lo) <= 64 * _EPS * max(abs(lo), abs(hi)):
            # below floating-point resolution: keep as is
            frozen.append((neg_e, lo, hi, k, e))
            if not heap:
                converged = False
                break
            continue
        k1, e1 = _gk15(g, lo, mid)
        k2, e2 = _gk15(g, mid, hi)
        evals += 30
        heapq.heappush(heap, (-float(np.ravel(e1)[0]), lo, mid, k1, e1))
        heapq.heappush(heap, (-float(np.ravel(e2)[0]), mid, hi, k2, e2))
        err += float(np.ravel(e1)[0]) + float(np.ravel(e2)[0]) + neg_e
        value = value + np.ravel(k1) + np.ravel(k2) - np.ravel(k)
        if err <= max(abs_tol, rel_tol * abs(value[0])):
            # confirm with exact summation before stopping
            heap.extend(frozen)
            frozen = []
            heapq.heapify(heap)
            value, err = totals()
    heap.extend(frozen)
    value, err = totals()
    return value, err, evals, converged


def _edges(m: _Mapped, breakpoints) -> list[float]:
    pts = {m.lo, m.hi}
    for x in breakpoints:
        if not math.isfinite(x):
            continue
        t = m.to_param(float(x))
        if m.lo < t < m.hi:
            pts.add(t)
    return sorted(pts)


def _integrate_rows(f, a, b, rel_tol, abs_tol, max_evals, breakpoints):
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    sign = 1.0
    if a == b:
        return np.zeros(1), 0.0, 0, True
    if a > b:
        a, b = b, a
        sign = -1.0
    m = _Mapped(f, float(a), float(b))
    value, err, evals, ok = _adapt(m, _edges(m, breakpoints), rel_tol, abs_tol, max_evals)
    return sign * value, err, evals, ok


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-13,
    *,
    max_evals: int = DEFAULT_MAX_EVALS,
    breakpoints: Sequence[float] = (),
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod (7/15) integral of ``f`` over ``[a, b]``.

    ``a`` may be ``-inf`` and ``b`` may be ``+inf``.  ``breakpoints`` lists
    abscissae (e.g. kinks) that must sit on an interval boundary.  When the
    evaluation budget runs out the best estimate is returned with
    ``converged=False``.
    """
    value, err, evals, ok = _integrate_rows(f, a, b, rel_tol, abs_tol, max_evals, breakpoints)
    return QuadratureResult(float(value[0]), err, evals, ok)


def integrate_2d(
    f: Callable[[float, np.ndarray], np.ndarray],
    outer: tuple[float, float],
    inner: tuple[float, float] | Callable[[float], tuple[float, float]],
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-11,
    *,
    max_evals: int = DEFAULT_MAX_EVALS,
    outer_breakpoints: Sequence[float] = (),
    inner_breakpoints: Sequence[float] | Callable[[float], Sequence[float]] = (),
) -> QuadratureResult:
    """Nested adaptive integral of ``f(x, y)``; ``y`` is the inner variable.

    ``inner`` is either a fixed ``(c, d)`` pair or a function of ``x``
    returning one; ``inner_breakpoints`` may also depend on ``x``.  Inner
    integrations run ten times tighter than the outer one and their error
    estimates are integrated along with the value.
    """
    return integrate_nd(
        lambda x, y: f(x, y),
        [outer, inner],
        rel_tol,
        abs_tol,
        max_evals=max_evals,
        breakpoints=[outer_breakpoints, inner_breakpoints],
    )


def integrate_nd(
    f: Callable[..., np.ndarray],
    ranges: Sequence,
    rel_tol: float = 1e-6,
    abs_tol: float = 1e-10,
    *,
    max_evals: int = DEFAULT_MAX_EVALS,
    breakpoints: Sequence[Sequence[float]] | None = None,
) -> QuadratureResult:
    """Integrate ``f(x0, ..., x_{d-1})`` over a box by recursive nesting.

    The last variable is innermost and is passed as an array; outer ones are
    scalars.  Each entry of ``ranges`` is ``(lo, hi)`` or a callable taking
    the outer coordinates and returning ``(lo, hi)``; ``breakpoints`` entries
    may likewise be sequences or callables.  ``max_evals`` is the
    budget per 1-D integration at every level.  Only ``dim <= 3`` is
    supported.
    """
    dim = len(ranges)
    if not 1 <= dim <= 3:
        raise UnsupportedDimensionError(f"integrate_nd supports 1 to 3 dimensions, got {dim}")
    if breakpoints is None:
        breakpoints = [()] * dim
    state = {"evals": 0}

    def level(k: int, outer: tuple, rtol: float, atol: float):
        rng = ranges[k]
        lo, hi = rng(*outer) if callable(rng) else rng
        if k == dim - 1:
            g = lambda x: f(*outer, x)
        else:
            def g(xs):
                out = np.empty((2, xs.size))
                for i, x in enumerate(xs):
                    v, e = level(k + 1, outer + (float(x),), rtol / 10.0, atol / 10.0)
                    out[0, i] = v
                    out[1, i] = e
                return out
        bps = breakpoints[k]
        if callable(bps):
            bps = bps(*outer)
        # inner levels get a tenth of the tolerance, this level the rest
        share = 1.0 if k == dim - 1 else 0.9
        value, err, evals, ok = _integrate_rows(g, lo, hi, share * rtol, share * atol,
                                                max_evals, bps)
        state["evals"] += evals
        inner_err = abs(float(value[1])) if value.size > 1 else 0.0
        return float(value[0]), err + inner_err

    value, err = level(0, (), rel_tol, abs_tol)
    # inner error estimates are already part of err, so the outer test decides
    converged = err <= max(abs_tol, rel_tol * abs(value))
    return QuadratureResult(value, err, state["evals"], bool(converged))
