"""Small-N checks of the single-field representation of eigenstate moments.

For a hopping matrix with zero diagonal the moment on site ``n`` is

    I_q(n) = 1 / (pi rho(E) (q-2)!) int_0^inf dt_n t_n**(2q-3) Y(t_n)

    Y(t_n) = sqrt(2 pi)/w  prod_{p != n} int dt_p / (sqrt(2 pi) w t_p)
             det B exp(-sum_p [(sum_q T_pq t_q/t_p - E)**2 / (2 w**2) + t_p**2])

with ``B_pq = -T_pq + delta_pq sum_r T_pr t_r / t_p`` restricted to
``p, q != n``.  A constant diagonal ``c`` in ``T`` is moved into the energy,
``E -> E - c``; for the simplex ``c = 1/N``.

Sites are numbered from 1 throughout this module, matching the formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import (
    DomainError,
    InvalidDimensionError,
    InvalidInputError,
    QuadratureError,
    UnsupportedDimensionError,
)
from .model import HoppingMatrix, build_hopping, build_simplex_hopping
from .quadrature import QuadratureResult, _integrate_rows, integrate_2d, integrate_nd

__all__ = [
    "GenFunProblem",
    "TVector",
    "b_hat",
    "b_matrix",
    "det_b_simplex_closed",
    "iq_genfun_small_n",
    "iq_genfun_nested",
    "iq_genfun_mapped",
    "iq_definition_oracle",
    "dos_definition_oracle",
    "extrapolate_eta",
    "MAX_GENFUN_SITES",
]

MAX_GENFUN_SITES = 4
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GenFunProblem:
    """Hopping matrix, energy, disorder and site for a representation check.

    ``hopping`` is kept as given (used for ``B``); ``offdiag`` is the same
    matrix with its constant diagonal removed and ``effective_energy`` the
    correspondingly shifted energy (used in the exponent).
    """

    hopping: HoppingMatrix
    energy: float
    w: float
    site: int

    def __post_init__(self):
        n = self.hopping.n
        if not (math.isfinite(self.w) and self.w > 0):
            raise DomainError(f"disorder strength must be positive, got {self.w}")
        if not 1 <= int(self.site) <= n:
            raise InvalidInputError(f"site must lie in 1..{n}, got {self.site}")
        diag = np.diag(self.hopping.entries)
        if not np.all(diag == diag[0]):
            raise InvalidInputError(
                "hopping diagonal must vanish (or be constant, which shifts the energy)"
            )

    @classmethod
    def simplex(cls, n: int, w: float, energy: float = 0.0, site: int = 1) -> "GenFunProblem":
        return cls(build_simplex_hopping(n), float(energy), float(w), int(site))

    @classmethod
    def generic(cls, entries, w: float, energy: float = 0.0, site: int = 1) -> "GenFunProblem":
        t = entries if isinstance(entries, HoppingMatrix) else build_hopping(entries)
        if not t.zero_diagonal:
            raise InvalidInputError("generic hopping must have a zero diagonal")
        return cls(t, float(energy), float(w), int(site))

    @property
    def n_sites(self) -> int:
        return self.hopping.n

    @property
    def diagonal_shift(self) -> float:
        return float(self.hopping.entries[0, 0])

    @property
    def effective_energy(self) -> float:
        return self.energy - self.diagonal_shift

    @property
    def offdiag(self) -> np.ndarray:
        a = np.array(self.hopping.entries, dtype=float)
        np.fill_diagonal(a, 0.0)
        return a


@dataclass(frozen=True, eq=False)
class TVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise InvalidInputError("t-vector must be one-dimensional and non-empty")
        if np.any(v == 0) or not np.all(np.isfinite(v)):
            raise DomainError("t-vector components must be finite and nonzero")
        object.__setattr__(self, "values", v)


def _tvec(t) -> np.ndarray:
    return t.values if isinstance(t, TVector) else TVector(np.asarray(t, dtype=float)).values


def b_hat(problem: GenFunProblem, t) -> np.ndarray:
    """Full N x N matrix -T_pq + delta_pq sum_r T_pr t_r / t_p."""
    tv = _tvec(t)
    tm = problem.hopping.entries
    if tv.size != tm.shape[0]:
        raise InvalidDimensionError(f"t-vector length {tv.size} does not match N={tm.shape[0]}")
    out = -np.array(tm, dtype=float)
    out[np.diag_indices_from(out)] += (tm @ tv) / tv
    return out


def b_matrix(problem: GenFunProblem, t) -> np.ndarray:
    """``b_hat`` with the row and column of ``problem.site`` removed."""
    full = b_hat(problem, t)
    keep = [p for p in range(problem.n_sites) if p != problem.site - 1]
    return full[np.ix_(keep, keep)]


def det_b_simplex_closed(t, site: int, n_sites: int) -> float:
    """det B = t_n**2 / N**(N-1) (sum_r t_r)**(N-2) prod_p 1/t_p for the simplex."""
    tv = _tvec(t)
    if tv.size != n_sites:
        raise InvalidDimensionError(f"t-vector length {tv.size} does not match N={n_sites}")
    if not 1 <= site <= n_sites:
        raise InvalidInputError(f"site must lie in 1..{n_sites}, got {site}")
    n = n_sites
    return float(tv[site - 1] ** 2 / n ** (n - 1) * tv.sum() ** (n - 2) / np.prod(tv))


# ----------------------------------------------------------------------------
# generating-function quadrature

def _y_integrand(problem: GenFunProblem):
    """Integrand of Y as a function of the full t-vector, columns vectorized.

    Returns ``h(ts)`` for ``ts`` of shape (N, K) (row ``site-1`` holds t_n).
    """
    n = problem.n_sites
    k = problem.site - 1
    others = [p for p in range(n) if p != k]
    tfull = np.asarray(problem.hopping.entries, dtype=float)
    toff = problem.offdiag
    e = problem.effective_energy
    w = problem.w
    pref = SQRT_2PI / w * (SQRT_2PI * w) ** -(n - 1)

    def h(ts: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ratio = (toff @ ts) / ts
            expo = -np.sum((ratio - e) ** 2, axis=0) / (2.0 * w * w) - np.sum(ts * ts, axis=0)
            bfull = -tfull[None, :, :] + np.einsum(
                "pk,pq->kpq", (tfull @ ts) / ts, np.eye(n)
            )
            det = np.linalg.det(bfull[:, others][:, :, others]) if n > 1 else np.ones(ts.shape[1])
            val = pref * det / np.prod(ts[others], axis=0) * np.exp(expo)
        # the Gaussian wins wherever some t_p -> 0; make that limit explicit
        return np.where(expo < -700.0, 0.0, val)

    return h


def _check(res: QuadratureResult, what: str) -> QuadratureResult:
    if not res.converged:
        raise QuadratureError(
            f"{what}: quadrature did not converge (value {res.value:.6g}, "
            f"error estimate {res.error_estimate:.3g})",
            result=res,
        )
    return res


def _validate_moment_args(problem: GenFunProblem, q, rho) -> int:
    n = problem.n_sites
    if n > MAX_GENFUN_SITES:
        raise UnsupportedDimensionError(
            f"direct quadrature of the representation is limited to N <= {MAX_GENFUN_SITES}, got {n}"
        )
    if int(q) != q or q < 2:
        raise DomainError(f"moment order must be an integer >= 2, got {q}")
    if not (math.isfinite(rho) and rho > 0):
        raise DomainError(f"density of states must be positive, got {rho}")
    return int(q)


def iq_genfun_small_n(problem: GenFunProblem, q: int, rho: float, *, method: str = "auto",
                      rel_tol: float = 1e-5, abs_tol: float = 1e-10,
                      seed: int = 0) -> QuadratureResult:
    """I_q(site) from the generating function, Y integrated numerically.

    ``rho`` is the density of states at ``problem.energy`` used in the
    normalization.  ``method`` selects the quadrature:

    * ``"nested"``: adaptive Gauss-Kronrod over every t_p axis and then t_n.
      Fast at N = 2, about a minute at N = 3.
    * ``"mapped"``: randomized quasi-Monte Carlo after a change of variables
      (see :func:`iq_genfun_mapped`); used by ``"auto"`` for N >= 3.
    """
    _validate_moment_args(problem, q, rho)
    if method == "auto":
        method = "nested" if problem.n_sites <= 2 else "mapped"
    if method == "nested":
        return iq_genfun_nested(problem, q, rho, rel_tol=rel_tol, abs_tol=abs_tol)
    if method == "mapped":
        return iq_genfun_mapped(problem, q, rho, rel_tol=rel_tol, abs_tol=abs_tol, seed=seed)
    raise InvalidInputError(f"unknown method {method!r}; use 'auto', 'nested' or 'mapped'")


def iq_genfun_nested(problem: GenFunProblem, q: int, rho: float, *,
                     rel_tol: float = 1e-6, abs_tol: float = 1e-10) -> QuadratureResult:
    """Nested adaptive quadrature in the original t variables.

    Every t_p axis (p != n) is split at 0 and at the point where
    ``sum_r t_r`` vanishes given the outer coordinates.
    """
    q = _validate_moment_args(problem, q, rho)
    n = problem.n_sites
    k = problem.site - 1
    others = [p for p in range(n) if p != k]
    h = _y_integrand(problem)
    dims = n - 1
    full = (-math.inf, math.inf)

    def assemble(tn: float, outer: tuple, last: np.ndarray) -> np.ndarray:
        ts = np.empty((n, last.size))
        ts[k] = tn
        for j, p in enumerate(others[:-1]):
            ts[p] = outer[j]
        ts[others[-1]] = last
        return ts

    def breaks_for(tn):
        def bp(*outer):
            return (0.0, -(tn + sum(outer)))
        return bp

    def y_of(tn: float, rtol: float, atol: float):
        f = lambda *xs: h(assemble(tn, xs[:-1], xs[-1]))
        return integrate_nd(f, [full] * dims, rtol, atol, breakpoints=[breaks_for(tn)] * dims)

    state = {"evals": 0}

    def outer_fn(tns: np.ndarray) -> np.ndarray:
        out = np.empty((2, tns.size))
        for i, tn in enumerate(tns):
            r = y_of(float(tn), rel_tol / 10.0, abs_tol / 10.0)
            state["evals"] += r.evaluations
            wgt = tn ** (2 * q - 3)
            out[0, i] = wgt * r.value
            out[1, i] = wgt * r.error_estimate
        return out

    value, err, evals, ok = _integrate_rows(outer_fn, 0.0, math.inf, rel_tol, abs_tol,
                                            1_000_000, (0.5, 1.0, 2.0))
    scale = 1.0 / (math.pi * rho * math.factorial(q - 2))
    total_err = err + abs(float(value[1]))
    ok = total_err <= max(abs_tol, rel_tol * abs(float(value[0])))
    res = QuadratureResult(scale * float(value[0]), scale * total_err,
                           evals + state["evals"], bool(ok))
    return _check(res, f"generating-function moment (N={n}, q={q})")


def _mapped_integrand(problem: GenFunProblem, q: int):
    """Integrand of the mapped form, divided by the Gaussian sampling density.

    With t = t_n (1, y) the t_n integral is a Gamma function.  The remaining
    y_p (p != n) are traded for x_p = sum_r T_pr t_r / t_p, which turns the
    narrow ridges of the t-space integrand into flat directions:
    y = (diag(x) - T_oo)^(-1) T_on, with Jacobian -(diag(x) - T_oo)^(-1) diag(y).
    The Y integrand itself (``det B``, the 1/t_p factors and the exponent) is
    evaluated exactly as in the nested route.
    """
    n = problem.n_sites
    k = problem.site - 1
    others = [p for p in range(n) if p != k]
    d = n - 1
    tfull = np.asarray(problem.hopping.entries, dtype=float)
    toff = problem.offdiag
    e_eff = problem.effective_energy
    w = problem.w
    center = problem.energy
    t_oo = tfull[np.ix_(others, others)]
    t_on = tfull[others, k]
    pref = SQRT_2PI / w * (SQRT_2PI * w) ** -(n - 1)
    radial = math.gamma(q - 1) / 2.0
    eye = np.eye(d)

    def f(x: np.ndarray) -> np.ndarray:
        m = x.shape[0]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = x[:, :, None] * eye - t_oo
            y = np.linalg.solve(a, np.broadcast_to(t_on, (m, d))[..., None])[..., 0]
            ts = np.empty((n, m))
            ts[k] = 1.0
            ts[others] = y.T
            ratio = (toff @ ts) / ts
            expo = -np.sum((ratio - e_eff) ** 2, axis=0) / (2.0 * w * w)
            bfull = -tfull[None, :, :] + np.einsum("pk,pq->kpq", (tfull @ ts) / ts, np.eye(n))
            det = np.linalg.det(bfull[:, others][:, :, others])
            val = pref * det / np.prod(ts[others], axis=0) * np.exp(expo)
            val *= radial * (1.0 + np.sum(y * y, axis=1)) ** (1 - q)
            jac = np.abs(np.linalg.det(-np.linalg.solve(a, y[:, :, None] * eye)))
            dens = np.exp(-0.5 * np.sum(((x - center) / w) ** 2, axis=1)) / (SQRT_2PI * w) ** d
            out = val * jac / dens
        # singular draws (a measure-zero set) carry no weight
        return np.where(np.isfinite(out), out, 0.0)

    return f


def iq_genfun_mapped(problem: GenFunProblem, q: int, rho: float, *,
                     rel_tol: float = 1e-5, abs_tol: float = 1e-10, seed: int = 0,
                     replicates: int = 16, min_log2_points: int = 12,
                     max_log2_points: int = 17) -> QuadratureResult:
    """Randomized quasi-Monte Carlo in the mapped variables of ``_mapped_integrand``.

    The x_p are drawn as ``E + w * ndtri(u)`` from independently scrambled
    Sobol sequences; the error estimate is the standard error over the
    ``replicates`` scramblings.  The point count doubles until the estimate
    meets the tolerance or ``2**max_log2_points`` is reached.
    """
    q = _validate_moment_args(problem, q, rho)
    if replicates < 2:
        raise InvalidInputError("need at least two replicates for an error estimate")
    f = _mapped_integrand(problem, q)
    d = problem.n_sites - 1
    scale = 1.0 / (math.pi * rho * math.factorial(q - 2))
    evals = 0
    for m in range(min_log2_points, max_log2_points + 1):
        est = np.empty(replicates)
        for r in range(replicates):
            u = qmc.Sobol(d, scramble=True, seed=np.random.default_rng([seed, r])).random_base2(m)
            est[r] = np.mean(f(problem.energy + problem.w * ndtri(u)))
        evals += replicates << m
        value = scale * float(np.mean(est))
        err = scale * float(np.std(est, ddof=1)) / math.sqrt(replicates)
        if err <= max(abs_tol, rel_tol * abs(value)):
            break
    ok = err <= max(abs_tol, rel_tol * abs(value))
    return _check(QuadratureResult(value, err, evals, bool(ok)),
                  f"generating-function moment (mapped, N={problem.n_sites}, q={q})")


# ----------------------------------------------------------------------------
# brute-force disorder average at N = 2

def _two_site(problem: GenFunProblem):
    if problem.n_sites != 2:
        raise UnsupportedDimensionError(
            f"the definition oracle integrates two disorder variables; needs N=2, got {problem.n_sites}"
        )
    tm = problem.hopping.entries
    return float(tm[0, 0]), float(tm[0, 1])


_ORACLE_CUT = 9.0   # exp(-u**2) mass beyond |u| = 9 is below 1e-36


def _oracle(problem: GenFunProblem, q: float, eta: float, rel_tol: float):
    """Broadened averages sum_a <|f_a(n)|**2q delta_eta(E - E_a)> and the DOS.

    Disorder enters through m = (v1+v2)/2 and d = (v1-v2)/2, independent
    N(0, w**2/2); for H = c + [[v1, tau], [tau, v2]] the levels are
    c + m -+ sqrt(d**2 + tau**2) with |f(1)|**2 = (1 -+ d/r)/2.  The
    integrals run over u = m/w, v = d/w on [-9, 9]**2.
    """
    if not eta > 0:
        raise DomainError(f"broadening width must be positive, got {eta}")
    c, tau = _two_site(problem)
    w = problem.w
    e = problem.energy
    norm_eta = 1.0 / (math.sqrt(2.0 * math.pi) * eta)
    sign_site = 1.0 if problem.site == 1 else -1.0
    cut = _ORACLE_CUT

    def pieces(v: float, u: np.ndarray):
        d = w * v
        r = math.hypot(d, tau)
        p = np.exp(-(u * u + v * v)) / math.pi
        out = []
        for s in (-1.0, 1.0):
            lev = c + w * u + s * r
            dl = norm_eta * np.exp(-0.5 * ((e - lev) / eta) ** 2)
            amp = 0.5 * (1.0 + s * sign_site * d / r) if r > 0 else 0.5
            out.append((p * dl, amp))
        return out

    def bp(v):
        # delta_eta peaks where a level crosses E, plus one width either side
        r = math.hypot(w * v, tau)
        pts = []
        for centre in (e - c - r, e - c + r):
            pts += [(centre + k * eta) / w for k in (-1.0, 0.0, 1.0)]
        return tuple(x for x in pts if -cut < x < cut)

    def num(v, u):
        return sum(pd * amp**q for pd, amp in pieces(v, u))

    def den(v, u):
        # per-site density: (1/N) sum over both levels
        return 0.5 * sum(pd for pd, _ in pieces(v, u))

    ranges = dict(outer=(-cut, cut), inner=(-cut, cut))
    a = integrate_2d(num, rel_tol=rel_tol, abs_tol=1e-13, outer_breakpoints=(0.0,),
                     inner_breakpoints=bp, **ranges)
    b = integrate_2d(den, rel_tol=rel_tol, abs_tol=1e-13, outer_breakpoints=(0.0,),
                     inner_breakpoints=bp, **ranges)
    _check(a, "definition oracle numerator")
    _check(b, "definition oracle density")
    return a.value, b.value


def iq_definition_oracle(problem: GenFunProblem, q: float, delta_width: float, *,
                         rel_tol: float = 1e-9) -> float:
    """(1/rho_eta) sum_a <|f_a(n)|**2q delta_eta(E - E_a)> for N = 2.

    ``delta_eta`` is a normalized Gaussian of width ``delta_width``; the
    density in the ratio uses the same broadening, so the ratio tends to the
    moment as the width goes to zero (see ``extrapolate_eta``).
    """
    a, b = _oracle(problem, float(q), float(delta_width), rel_tol)
    return a / b


def dos_definition_oracle(problem: GenFunProblem, delta_width: float, *,
                          rel_tol: float = 1e-9) -> float:
    """Broadened per-site density of states at ``problem.energy`` for N = 2."""
    return _oracle(problem, 1.0, float(delta_width), rel_tol)[1]


def extrapolate_eta(etas, values) -> float:
    """Value at zero width from samples even in the width (fit in eta**2)."""
    etas = np.asarray(etas, dtype=float)
    values = np.asarray(values, dtype=float)
    if etas.size != values.size or etas.size < 2:
        raise InvalidInputError("need at least two (width, value) pairs of equal length")
    coeff = np.polyfit(etas**2, values, etas.size - 1)
    return float(coeff[-1])
