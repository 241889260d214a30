"""Analytic moments of simplex eigenstates at E = 0.

Two evaluations are provided:

* ``iq_thermo``: the large-N limit, a single integral over ``z`` of the
  kernel ``F_q`` (or its real-q form) against a logarithm.
* ``iq_finite_n``: the exact two-fold integral for a finite even ``N`` built
  from the kernels ``f(s, theta)`` and ``g(s, theta)``.

Both use the large-N density of states ``rho0(w)`` in the normalization.

The finite-N integral is evaluated in the variables ``(t, z)`` with
``s = t/N``, ``theta = 2 t z / N``.  In these variables

    I_q(N) = 4 / (pi (q-2)!) * int_0^inf dt/t int_0^inf dz
             cos(2 t z w) f(t/N, 2tz/N)**(N-1) G(t**2 / 2N**2, z)

where ``G(eps, z) = 2 int_0^inf y**(2q-2) exp(-y**2 - eps/y**2) cos(2zy) dy``
equals ``N**(1-2q) t**(2q-1) g(t/N, 2tz/N)`` and tends to ``F_q(z)`` as
``eps -> 0``.  Because ``int G dz = 0`` the bracket
``cos(...) f**(N-1) - 1`` may replace ``cos(...) f**(N-1)``; that form is
used at small ``t`` where the ``1/t`` weight would otherwise amplify
cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidInputError, QuadratureError
from .quadrature import QuadratureResult, integrate_1d, integrate_2d
from .specfun import MomentOrder, erf, f_q_closed, f_q_tilde, gamma

__all__ = [
    "KernelArgs",
    "AnalyticMomentQuery",
    "FiniteNQuery",
    "rho0",
    "log_argument",
    "f_kernel",
    "f_kernel_power",
    "g_kernel",
    "g_scaled",
    "iq_thermo",
    "iq_finite_n",
    "iq_thermo_regulated",
    "iq_thermo_two_path",
]

SQRT_PI = math.sqrt(math.pi)
SQRT_2 = math.sqrt(2.0)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class KernelArgs:
    s: float
    theta: float


@dataclass(frozen=True)
class AnalyticMomentQuery:
    order: MomentOrder
    w: float

    def __post_init__(self):
        if not (math.isfinite(self.w) and self.w > 0):
            raise DomainError(f"disorder strength must be positive, got {self.w}")

    @property
    def prefactor(self) -> float:
        """r_q = 1 / (2 pi Gamma(q - 1)) once rho(0) has been substituted."""
        return 1.0 / (2.0 * math.pi * gamma(self.order.q - 1.0))


@dataclass(frozen=True)
class FiniteNQuery:
    order: MomentOrder
    w: float
    n: int

    def __post_init__(self):
        if not self.order.is_integer:
            raise DomainError(f"finite-N moments need integer q >= 2, got {self.order.q}")
        if not (math.isfinite(self.w) and self.w > 0):
            raise DomainError(f"disorder strength must be positive, got {self.w}")
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise InvalidInputError(
                f"finite-N formula assumes an even number of sites, got n={self.n}"
            )


def _order(q) -> MomentOrder:
    return q if isinstance(q, MomentOrder) else MomentOrder(float(q))


def rho0(w: float) -> float:
    """Large-N density of states at E = 0: 1 / (sqrt(2 pi) w)."""
    if not (math.isfinite(w) and w > 0):
        raise DomainError(f"disorder strength must be positive, got {w}")
    return 1.0 / (math.sqrt(2.0 * math.pi) * w)


def log_argument(z, w: float):
    """A(z) = 4 z**2 w**2 + 2 (exp(-z**2) + sqrt(pi) |z| erf|z|)**2."""
    z = np.abs(np.asarray(z, dtype=float))
    a = np.exp(-z * z) + SQRT_PI * z * erf(z)
    return 4.0 * z * z * w * w + 2.0 * a * a


def log_of_log_argument(z, w: float):
    """ln A(z), factoring out z**2 for |z| > 1 so huge z do not overflow."""
    z = np.abs(np.atleast_1d(np.asarray(z, dtype=float)))
    out = np.empty_like(z)
    small = z <= 1.0
    out[small] = np.log(log_argument(z[small], w))
    zb = z[~small]
    a = np.exp(-zb * zb) / zb + SQRT_PI * erf(zb)
    out[~small] = 2.0 * np.log(zb) + np.log(4.0 * w * w + 2.0 * a * a)
    return out


def _decay_rate(z):
    """a(z) = sqrt(2) exp(-z**2) + sqrt(2 pi) |z| erf|z|: large-N rate of f**(N-1)."""
    z = np.abs(np.asarray(z, dtype=float))
    return SQRT_2 * (np.exp(-z * z) + SQRT_PI * z * erf(z))


# ----------------------------------------------------------------------------
# kernels

def _panels(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    return (half * _GL_X + 0.5 * (a + b)).ravel(), (half * _GL_W).ravel()


_X_LO = 0.08          # exp(-1/(2 x**2)) < 1e-33 below this
_X_CUT = 6.5          # exp(-(s x)**2) < 1e-18 beyond x = _X_CUT / s
_S_ZERO = 1e-17       # |f(s, theta) - f(0, theta)| <= sqrt(2) s, below rounding here


def _f_defect(s: float, theta: np.ndarray) -> np.ndarray:
    """1 - f(s, theta) for s > 0, theta >= 0.

    Composite 16-point Gauss-Legendre in ln x on [0.08, 6.5/s] with panels
    narrowed where cos(theta x) turns quickly; beyond 6.5/s the Gaussian
    factor is below 1e-18 and the remainder of the weight integrates to
    erf(s / (6.5 sqrt 2)).
    """
    upper = max(_X_CUT / s, 2.0 * _X_LO)
    lo, hi = math.log(_X_LO), math.log(upper)
    tmax = float(np.max(theta)) if theta.size else 0.0
    edges = [lo]
    v = lo
    while v < hi:
        h = 0.1
        if tmax > 0:
            h = min(h, 2.5 / (tmax * math.exp(v)))
        v = min(v + max(h, 1e-4), hi)
        edges.append(v)
    vv, wv = _panels(np.asarray(edges))
    x = np.exp(vv)
    # dx/x**2 = dv/x; both halves of the line give the factor 2
    base = math.sqrt(2.0 / math.pi) * np.exp(-0.5 / (x * x)) / x * wv
    a = (s * x) ** 2
    bx = np.outer(theta, x)
    # 1 - exp(-a) cos(b), arranged to keep relative accuracy when both are small
    bracket = -np.expm1(-a) * np.cos(bx) + 2.0 * np.sin(0.5 * bx) ** 2
    tail = math.erf(1.0 / (SQRT_2 * upper))
    return bracket @ base + tail


_PHI = math.pi / 6.0   # contour angle for s = 0


def _f_zero_s(theta: np.ndarray) -> np.ndarray:
    """f(0, theta) along the ray x = r exp(i pi/6).

    On the real axis the s = 0 integrand decays only like cos(theta x)/x**2.
    Inside the sector |arg x| < pi/4 exp(-1/(2x**2)) still vanishes at the
    origin and exp(i theta x) decays like exp(-theta r/2), so the rotated
    integral is smooth and exponentially convergent.
    """
    out = np.ones_like(theta)
    rot = complex(math.cos(_PHI), math.sin(_PHI))
    for k, th in enumerate(theta):
        if th == 0.0:
            continue

        def ray(r, th=th):
            x = r * rot
            return (np.exp(-0.5 / (x * x) + 1j * th * x) / (x * x) * rot).real

        scale = 1.0 / (th * math.sin(_PHI))
        res = integrate_1d(ray, 0.0, math.inf, rel_tol=1e-13, abs_tol=1e-15,
                           breakpoints=(0.5, 1.0, scale, 4.0 * scale, 16.0 * scale))
        if not res.converged:
            raise QuadratureError(f"f(0, {th}): contour integral did not converge", result=res)
        out[k] = math.sqrt(2.0 / math.pi) * res.value
    return out


def f_kernel(s: float, theta):
    """f(s, theta) = int dx/sqrt(2 pi) x**-2 exp(-1/(2x**2) - s**2 x**2 + i theta x).

    Real and even in both arguments; ``theta`` may be an array.
    """
    scalar = np.ndim(theta) == 0
    th = np.abs(np.atleast_1d(np.asarray(theta, dtype=float)))
    s = abs(float(s))
    if not (math.isfinite(s) and np.all(np.isfinite(th))):
        raise DomainError("f_kernel needs finite arguments")
    val = _f_zero_s(th) if s < _S_ZERO else 1.0 - _f_defect(s, th)
    return float(val[0]) if scalar else val


def f_kernel_power(s: float, theta, m: int) -> np.ndarray:
    """f(s, theta)**m evaluated as exp(m log1p(-(1 - f))) where f > 0."""
    th = np.abs(np.atleast_1d(np.asarray(theta, dtype=float)))
    s = abs(float(s))
    d = 1.0 - _f_zero_s(th) if s < _S_ZERO else _f_defect(s, th)
    out = np.empty_like(d)
    pos = d < 1.0
    out[pos] = np.exp(m * np.log1p(-d[pos]))
    neg = ~pos
    if neg.any():
        f = 1.0 - d[neg]
        out[neg] = np.sign(f) ** m * np.abs(f) ** m
    return out


def _g_nodes(q: float, zmax: float) -> tuple[np.ndarray, np.ndarray]:
    # geometric panels towards y = 0, then uniform ones out to the Gaussian cut
    geo = 0.5 * 2.0 ** -np.arange(50, -1, -1, dtype=float)
    yhi = 7.0 + 0.5 * q
    width = min(0.25, 1.25 / max(zmax, 1e-300))
    nuni = max(1, int(math.ceil((yhi - 0.5) / width)))
    uni = np.linspace(0.5, yhi, nuni + 1)
    return _panels(np.concatenate([geo, uni[1:]]))


def g_scaled(eps: float, z, q) -> np.ndarray:
    """G(eps, z) = 2 int_0^inf |y|**(2q-2) exp(-y**2 - eps/y**2) cos(2 z y) dy.

    ``G(0, z)`` is the Gaussian integral defining ``F_q``.
    """
    order = _order(q)
    if eps < 0 or not math.isfinite(eps):
        raise DomainError(f"eps must be finite and non-negative, got {eps}")
    scalar = np.ndim(z) == 0
    z = np.abs(np.atleast_1d(np.asarray(z, dtype=float)))
    y, wy = _g_nodes(order.q, float(np.max(z)) if z.size else 0.0)
    expo = -y * y + (2.0 * order.q - 2.0) * np.log(y)
    if eps > 0:
        expo = expo - eps / (y * y)
    weights = 2.0 * np.exp(expo) * wy
    val = np.cos(2.0 * np.outer(z, y)) @ weights
    return float(val[0]) if scalar else val


def g_kernel(s: float, theta, q):
    """g(s, theta) = int dx |x|**(2q-2) exp(-1/(2x**2) - s**2 x**2 + i theta x).

    Computed as ``|s|**(1-2q) G(s**2/2, theta/(2|s|))``; divergent at s = 0.
    """
    s = abs(float(s))
    if s == 0.0:
        raise DomainError("kernel divergent at s=0")
    order = _order(q)
    scalar = np.ndim(theta) == 0
    th = np.abs(np.atleast_1d(np.asarray(theta, dtype=float)))
    val = s ** (1.0 - 2.0 * order.q) * g_scaled(0.5 * s * s, th / (2.0 * s), order)
    return float(val[0]) if scalar else val


# ----------------------------------------------------------------------------
# thermodynamic limit

_Z_SPLIT = 20.0
_U_MAX = 300.0
_T_SUBTRACT = 1.0     # (t, z) forms subtract the t -> 0 constant only below this


def _kernel_fn(order: MomentOrder, path: str):
    if path == "auto":
        path = "integer" if order.is_integer else "tilde"
    if path == "integer":
        if not order.is_integer:
            raise DomainError(f"integer path needs integer q >= 2, got {order.q}")
        k = int(order.q)
        norm = 1.0 / math.factorial(k - 2)
        return lambda z: f_q_closed(k, z) * norm
    if path == "tilde":
        norm = 1.0 / gamma(order.q - 1.0)
        return lambda z: f_q_tilde(order.q, z) * norm
    raise InvalidInputError(f"unknown kernel path {path!r}")


def _check(res: QuadratureResult, what: str) -> QuadratureResult:
    if not res.converged:
        raise QuadratureError(
            f"{what}: quadrature did not converge (value {res.value:.6g}, "
            f"error estimate {res.error_estimate:.3g}, {res.evaluations} evaluations)",
            result=res,
        )
    return res


def iq_thermo(query: AnalyticMomentQuery, *, path: str = "auto", rel_tol: float = 1e-9,
              log_scale: float = 1.0) -> QuadratureResult:
    """Large-N moment I_q at E = 0.

    ``-(2/pi) int_0^inf K(z) ln A(z) dz`` with ``K = F_q/(q-2)!`` on the
    integer path and ``K = F~_q/Gamma(q-1)`` on the real-q path.
    ``log_scale`` multiplies ``A``; the result does not depend on it
    because ``K`` integrates to zero.
    """
    kern = _kernel_fn(query.order, path)
    w = query.w
    c = math.log(log_scale)

    def integrand(z):
        return kern(z) * (log_of_log_argument(z, w) + c)

    # the log turns over at z ~ 1/w
    bps = sorted({1.0 / w, 0.1 / w, 10.0 / w, 1.0, 3.0})
    what = f"iq_thermo(q={query.order.q}, w={w})"
    integer_path = path == "integer" or (path == "auto" and query.order.is_integer)
    if integer_path:
        res = _check(integrate_1d(integrand, 0.0, math.inf, rel_tol=rel_tol, abs_tol=1e-14,
                                  breakpoints=bps), what)
        value, err, evals = res.value, res.error_estimate, res.evaluations
    else:
        # real q: the kernel decays only like z**(1-2q); integrate the tail in u = ln z
        head = _check(integrate_1d(integrand, 0.0, _Z_SPLIT, rel_tol=rel_tol, abs_tol=1e-14,
                                   breakpoints=[b for b in bps if b < _Z_SPLIT]), what)

        def tail_fn(u):
            z = np.exp(u)
            return integrand(z) * z

        tail = _check(integrate_1d(tail_fn, math.log(_Z_SPLIT), _U_MAX, rel_tol=rel_tol,
                                   abs_tol=1e-14), what)
        # beyond Z = e**U_MAX, |K(z)| <= |K(Z)| (Z/z)**(2q-1) and ln A <= 2 ln z + ln(4w**2 + 8)
        p = 2.0 * query.order.q - 2.0
        kz = abs(float(kern(math.exp(_U_MAX))))
        lz = math.log(4.0 * w * w + 8.0) + abs(c)
        rest = kz * math.exp(_U_MAX) * ((2.0 * _U_MAX + lz) / p + 2.0 / (p * p))
        value = head.value + tail.value
        err = head.error_estimate + tail.error_estimate + rest
        evals = head.evaluations + tail.evaluations
    scale = -2.0 / math.pi
    return QuadratureResult(scale * value, abs(scale) * err, evals, True)


def iq_thermo_regulated(query: AnalyticMomentQuery, delta: float, *,
                        rel_tol: float = 1e-9) -> QuadratureResult:
    """Two-fold (t, z) form of the large-N moment with 1/t replaced by t**(delta-1).

    ``4/(pi (q-2)!) int_0^inf dt t**(delta-1) int_0^inf dz K(z)
    [cos(2 t z w) exp(-t a(z)) - 1]``; tends to ``iq_thermo`` as
    ``delta -> 0``.  The constant is subtracted only for t < 1: it integrates
    to zero against K, and for t > 1 it would only add cancellation.
    """
    if not 0 <= delta < 1:
        raise DomainError(f"regulator exponent must lie in [0, 1), got {delta}")
    kern = _kernel_fn(query.order, "auto")
    w = query.w

    def f(t, z):
        br = np.cos(2.0 * t * z * w) * np.exp(-t * _decay_rate(z))
        if t < _T_SUBTRACT:
            br = br - 1.0
        return t ** (delta - 1.0) * kern(z) * br

    zcut = 9.0 + 0.5 * query.order.q
    res = integrate_2d(f, (0.0, math.inf), (0.0, zcut), rel_tol=rel_tol, abs_tol=1e-13,
                       outer_breakpoints=(0.5, _T_SUBTRACT, 2.0, 10.0),
                       inner_breakpoints=(0.5, 1.0, 2.0, 4.0))
    res = _check(res, f"regulated two-fold moment (delta={delta})")
    scale = 4.0 / math.pi
    return QuadratureResult(scale * res.value, scale * res.error_estimate,
                            res.evaluations, res.converged)


@dataclass(frozen=True)
class TwoPathCheck:
    deltas: tuple[float, ...]
    regulated: tuple[float, ...]
    extrapolated: float
    direct: float
    evaluations: int = field(default=0)

    @property
    def deviation(self) -> float:
        return abs(self.extrapolated - self.direct)


def iq_thermo_two_path(query: AnalyticMomentQuery, deltas=(0.1, 0.05, 0.025), *,
                       rel_tol: float = 1e-7) -> TwoPathCheck:
    """Compare ``iq_thermo`` with the regulated two-fold form extrapolated to delta = 0.

    The t integral of the regulated form is Gamma(delta) c**(-delta), so the
    values divided by Gamma(1 + delta) are fitted by a polynomial in ``delta``
    of degree ``len(deltas) - 1`` and read off at zero.  Removing the known
    Gamma factor shrinks the cubic remainder of the fit by about a factor 7.
    """
    vals = [iq_thermo_regulated(query, d, rel_tol=rel_tol) for d in deltas]
    scaled = [v.value / math.gamma(1.0 + d) for v, d in zip(vals, deltas)]
    coeff = np.polyfit(np.asarray(deltas), scaled, len(deltas) - 1)
    direct = iq_thermo(query)
    return TwoPathCheck(tuple(deltas), tuple(v.value for v in vals), float(coeff[-1]),
                        direct.value, sum(v.evaluations for v in vals) + direct.evaluations)


# ----------------------------------------------------------------------------
# finite N


def _finite_n_integrand(q: int, w: float, n: int):
    m = n - 1

    def inner(t: float, z: np.ndarray) -> np.ndarray:
        s = t / n
        fpow = f_kernel_power(s, 2.0 * t * z / n, m)
        g = g_scaled(0.5 * s * s, z, q)
        phase = 2.0 * t * z * w
        if t < _T_SUBTRACT:
            # cos(phase) f**m - 1 without the cancellation
            with np.errstate(divide="ignore"):
                lg = np.where(fpow > 0, np.log(np.where(fpow > 0, fpow, 1.0)), 0.0)
            br = np.where(
                fpow > 0,
                np.expm1(lg) * np.cos(phase) - 2.0 * np.sin(0.5 * phase) ** 2,
                fpow * np.cos(phase) - 1.0,
            )
        else:
            br = fpow * np.cos(phase)
        return g * br / t

    return inner


def iq_finite_n(query: FiniteNQuery, *, rel_tol: float = 1e-7) -> QuadratureResult:
    """Exact moment I_q(N) of the simplex at E = 0 for even N.

    Outer range in ``t`` is cut at ``40 + 10 max(1, 1/w)``; the neglected
    tail is bounded by the envelope ``exp(-sqrt 2 t (N-1)/N)`` and added to
    the error estimate.
    """
    q = int(query.order.q)
    n = int(query.n)
    w = query.w
    tcut = 40.0 + 10.0 * max(1.0, 1.0 / w)
    zcut = 9.0 + 0.5 * q
    inner = _finite_n_integrand(q, w, n)
    res = integrate_2d(inner, (0.0, tcut), (0.0, zcut), rel_tol=rel_tol, abs_tol=1e-11,
                       outer_breakpoints=(0.1, _T_SUBTRACT, 4.0, 12.0),
                       inner_breakpoints=(0.5, 1.0, 2.0, 4.0))
    res = _check(res, f"iq_finite_n(q={q}, w={w}, n={n})")
    scale = 4.0 / (math.pi * math.factorial(q - 2))
    # |G| <= Gamma(q - 1/2) bounds the z-integral of the tail by zcut * Gamma(q - 1/2)
    rate = SQRT_2 * (n - 1) / n
    tail = zcut * gamma(q - 0.5) * math.exp(-rate * tcut) / (rate * tcut)
    return QuadratureResult(scale * res.value, scale * (res.error_estimate + tail),
                            res.evaluations, res.converged)
