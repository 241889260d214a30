"""Self-checks run by ``simloc selftest`` and ``simloc genfun-check``.

Each check yields ``(name, passed, detail)``.  The heavier checks are also
exercised by the test suite; here they are packaged for a quick run from the
command line.
"""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .analytic import (
    AnalyticMomentQuery,
    g_kernel,
    iq_thermo,
    iq_thermo_two_path,
)
from .ensemble import run_ensemble
from .genfun import (
    GenFunProblem,
    b_hat,
    b_matrix,
    det_b_simplex_closed,
    dos_definition_oracle,
    extrapolate_eta,
    iq_definition_oracle,
    iq_genfun_small_n,
)
from .model import ModelParams, build_simplex_hopping, build_uniform_hopping
from .quadrature import integrate_1d, integrate_2d, integrate_nd
from .specfun import MomentOrder, erf, f_q_closed, f_q_pow2_coeff, f_q_tilde, gamma, kummer_1f1, lgamma

__all__ = [
    "selftest_checks",
    "genfun_checks",
    "random_tvector",
    "gaussian_integral",
    "fq_condition_scale",
    "three_way_n2",
    "pairwise_agree",
]

Check = tuple[str, bool, str]

# g(s=1, theta=0, q=2) from a 30-digit mpmath evaluation
G_KERNEL_REFERENCE = 0.520158236368127
ETA_FACTORS = (0.2, 0.1, 0.05)
TWO_PATH_TOL = 1e-4


def gaussian_integral(q: int, z: float, rel_tol: float = 1e-12) -> float:
    """int_R y**(2q-2) exp(-y**2) cos(2 z y) dy by adaptive quadrature."""
    f = lambda y: y ** (2 * q - 2) * np.exp(-y * y) * np.cos(2.0 * z * y)
    r = integrate_1d(f, 0.0, math.inf, rel_tol=rel_tol, abs_tol=1e-15,
                     breakpoints=tuple(np.arange(1.0, 12.0)))
    return 2.0 * r.value


def fq_condition_scale(q: float) -> float:
    """int_R y**(2q-2) exp(-y**2) dy, the size of the integrand's absolute mass.

    Relative errors of the kernel are measured against this scale: near the
    zeros of F_q a pointwise relative error is meaningless.
    """
    return gamma(q - 0.5)


def _fq_checks() -> Iterator[Check]:
    zs = np.linspace(0.0, 5.0, 20)
    worst = 0.0
    for q in range(2, 7):
        scale = fq_condition_scale(q)
        for z in zs:
            worst = max(worst, abs(f_q_closed(q, z) - gaussian_integral(q, z)) / scale)
    yield ("F_q closed form vs quadrature (scaled by Gamma(q-1/2))", worst <= 1e-8,
           f"q=2..6, 20 z-points, max scaled error {worst:.2e} (tol 1e-8)")

    worst = 0.0
    for q in range(2, 7):
        scale = fq_condition_scale(q)
        worst = max(worst, float(np.max(np.abs(f_q_closed(q, zs) - f_q_tilde(q, zs)))) / scale)
    yield ("F_q vs Gamma(q-1/2) 1F1(q-1/2; 1/2; -z^2)", worst <= 1e-9,
           f"max scaled difference {worst:.2e} (tol 1e-9)")

    worst = 0.0
    for q in range(2, 7):
        r = integrate_1d(lambda z: f_q_closed(q, z), 0.0, math.inf, rel_tol=1e-12, abs_tol=1e-14)
        worst = max(worst, abs(2.0 * r.value) / fq_condition_scale(q))
    yield ("sum rule int F_q dz = 0", worst <= 1e-8, f"max |integral| {worst:.2e} (tol 1e-8)")

    closed, pow2 = f_q_closed(2, 0.0), f_q_pow2_coeff(2, 0.0)
    quad = gaussian_integral(2, 0.0)
    yield ("F_2(0) coefficient form", abs(closed - quad) <= 1e-12 * quad,
           f"closed form {closed:.12f} = sqrt(pi)/2, quadrature {quad:.12f}; "
           f"2^p-coefficient form gives {pow2:.12f} = 4 sqrt(pi)")


def _specfun_checks() -> Iterator[Check]:
    xs = np.linspace(-4.0, 4.0, 33)
    err = max(abs(erf(x) - math.erf(x)) for x in xs)
    yield ("erf", err <= 1e-15, f"max abs error vs math.erf {err:.1e}")

    pts = [0.1, 0.5, 1.0, 1.5, 2.5, 7.3, 30.0, 171.0]
    err = max(abs(lgamma(x) - math.lgamma(x)) / max(1.0, abs(math.lgamma(x))) for x in pts)
    yield ("lgamma (Lanczos)", err <= 1e-13, f"max rel error vs math.lgamma {err:.1e}")

    x = np.linspace(-40.0, 40.0, 81)
    err = float(np.max(np.abs(kummer_1f1(2.3, 2.3, x) / np.exp(x) - 1.0)))
    xn = x[x != 0]
    err2 = float(np.max(np.abs(kummer_1f1(1.0, 2.0, xn) / (np.expm1(xn) / xn) - 1.0)))
    ok = max(err, err2) <= 1e-12
    yield ("1F1 identities", ok,
           f"1F1(a;a;x)=e^x rel err {err:.1e}, 1F1(1;2;x)=(e^x-1)/x rel err {err2:.1e}")

    # regime boundary of the negative-argument branch
    lo = kummer_1f1(1.7, 0.5, -300.0 + 1e-9)
    hi = kummer_1f1(1.7, 0.5, -300.0 - 1e-9)
    jump = abs(lo - hi) / abs(lo)
    yield ("1F1 series/asymptotic continuity", jump <= 1e-9, f"relative jump at x=-300: {jump:.1e}")


def _quadrature_checks() -> Iterator[Check]:
    r = integrate_1d(lambda x: np.exp(-x * x), -math.inf, math.inf)
    yield ("GK15 infinite interval", abs(r.value - math.sqrt(math.pi)) <= 1e-12,
           f"int exp(-x^2) = {r.value:.15f}, error estimate {r.error_estimate:.1e}")
    r = integrate_1d(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0)
    yield ("GK15 endpoint singularity", abs(r.value - 2.0) <= 1e-9,
           f"int x^(-1/2) = {r.value:.12f}")
    r = integrate_2d(lambda x, y: np.exp(-x * x - y * y), (-math.inf, math.inf), (-math.inf, math.inf))
    yield ("2-D product", abs(r.value - math.pi) <= 1e-9, f"Gaussian = {r.value:.12f}")
    r = integrate_nd(lambda x, y, z: np.exp(-(x * x + y * y + z * z)), [(-math.inf, math.inf)] * 3,
                     rel_tol=1e-8)
    exact = math.pi**1.5
    yield ("3-D nested", abs(r.value - exact) <= 1e-7 * exact, f"Gaussian = {r.value:.10f}")


def _analytic_checks() -> Iterator[Check]:
    g = float(np.asarray(g_kernel(1.0, 0.0, 2)).ravel()[0])
    yield ("kernel g(1, 0; q=2)", abs(g - G_KERNEL_REFERENCE) <= 1e-12,
           f"{g:.15f} vs reference {G_KERNEL_REFERENCE}")
    q3 = AnalyticMomentQuery(MomentOrder(3.0), 3.0)
    a = iq_thermo(q3, path="integer").value
    b = iq_thermo(q3, path="tilde").value
    yield ("integer and real-q paths", abs(a - b) <= 1e-9 * a, f"I_3(w=3): {a:.12f} vs {b:.12f}")
    chk = iq_thermo_two_path(AnalyticMomentQuery(MomentOrder(2.0), 3.0))
    yield ("regulated two-fold integral", chk.deviation <= TWO_PATH_TOL * abs(chk.direct),
           f"direct {chk.direct:.8f}, delta->0 extrapolation {chk.extrapolated:.8f}")


def selftest_checks() -> Iterator[Check]:
    yield from _specfun_checks()
    yield from _fq_checks()
    yield from _quadrature_checks()
    yield from _analytic_checks()


# ----------------------------------------------------------------------------
# representation checks

def random_tvector(rng: np.random.Generator, n: int) -> np.ndarray:
    """Components uniform on [-2, -0.1] U [0.1, 2]."""
    mag = rng.uniform(0.1, 2.0, n)
    return np.where(rng.random(n) < 0.5, -mag, mag)


def determinant_identity(rng: np.random.Generator, sizes=range(2, 9), draws: int = 100):
    """Worst relative error of the closed-form det B and worst zero-mode residual."""
    worst_det = 0.0
    worst_zero = 0.0
    for n in sizes:
        for _ in range(draws):
            t = random_tvector(rng, n)
            site = int(rng.integers(1, n + 1))
            prob = GenFunProblem.simplex(n, 1.0, site=site)
            closed = det_b_simplex_closed(t, site, n)
            brute = float(np.linalg.det(b_matrix(prob, t))) if n > 1 else 1.0
            worst_det = max(worst_det, abs(closed - brute) / abs(brute))
            z = t / np.linalg.norm(t)
            worst_zero = max(worst_zero, float(np.linalg.norm(b_hat(prob, t) @ z)))
    return worst_det, worst_zero


def pairwise_agree(a: float, sa: float, b: float, sb: float,
                   rel: float = 0.02, nsigma: float = 3.0) -> bool:
    """Within ``rel`` relative or ``nsigma`` combined standard errors."""
    if abs(a - b) <= rel * max(abs(a), abs(b)):
        return True
    sigma = math.hypot(sa, sb)
    return sigma > 0 and abs(a - b) <= nsigma * sigma


def three_way_n2(*, q: int = 2, w: float = 1.0, tau: float = 0.5, realizations: int = 100_000,
                 seed: int = 0, threads: int | None = None) -> dict:
    """Definition oracle, generating function and Monte Carlo for two sites.

    The density used to normalize the generating-function moment is the
    eta-extrapolated broadened density of the same oracle.
    """
    prob = GenFunProblem.generic([[0.0, tau], [tau, 0.0]], w)
    etas = [c * w for c in ETA_FACTORS]
    oracle = extrapolate_eta(etas, [iq_definition_oracle(prob, q, e) for e in etas])
    rho = extrapolate_eta(etas, [dos_definition_oracle(prob, e) for e in etas])
    gf = iq_genfun_small_n(prob, q, rho)
    res = run_ensemble(ModelParams(2, w, 0.0, seed), realizations, [q],
                       hopping=build_uniform_hopping(2, tau), threads=threads)
    mc = res.moments[0]
    return {
        "oracle": (oracle, 0.0),
        "genfun": (gf.value, gf.error_estimate),
        "monte_carlo": (mc.estimate, mc.std_error),
        "rho": rho,
        "states": mc.states_used,
    }


def simplex_n4_vs_mc(*, w: float = 3.0, q: int = 2, realizations: int = 100_000,
                     seed: int = 0, threads: int | None = None):
    """Numerator I * rho at N=4 from the generating function and Monte Carlo.

    The generating function is normalized with the large-N density; the
    product I * rho does not depend on that choice, and on the Monte Carlo
    side it is the in-window sum of moments per site and unit energy.
    """
    from .analytic import rho0

    r0 = rho0(w)
    gf = iq_genfun_small_n(GenFunProblem.simplex(4, w), q, r0)
    res = run_ensemble(ModelParams(4, w, 0.0, seed), realizations, [q],
                       hopping=build_simplex_hopping(4), threads=threads)
    window = res.moments[0].window
    norm = 4 * realizations * 2.0 * window.half_width
    per_state = res.state_iprs[:, 0]
    mc = float(per_state.sum()) / norm
    # compound-Poisson variance: in-window states are rare and nearly independent
    se = math.sqrt(float(np.sum(per_state**2))) / norm
    return (gf.value * r0, gf.error_estimate * r0), (mc, se)


def genfun_checks(*, seed: int = 0, realizations: int = 100_000,
                  threads: int | None = None) -> Iterator[Check]:
    rng = np.random.default_rng(seed)
    worst_det, worst_zero = determinant_identity(rng)
    yield ("closed-form det B vs brute force", worst_det <= 1e-10,
           f"N=2..8, 100 t-vectors each, max rel error {worst_det:.1e} (tol 1e-10)")
    yield ("zero mode B z = 0, z ~ t", worst_zero <= 1e-12,
           f"max residual {worst_zero:.1e} (tol 1e-12)")

    b = b_matrix(GenFunProblem.simplex(3, 1.0), [1.0, 2.0, 3.0])
    want = np.array([[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 1.0 / 3.0]])
    yield ("B matrix example N=3", bool(np.allclose(b, want, atol=1e-15)),
           f"det {np.linalg.det(b):.15f} (1/9)")

    tw = three_way_n2(realizations=realizations, seed=seed, threads=threads)
    names = ("oracle", "genfun", "monte_carlo")
    detail = ", ".join(f"{k} {tw[k][0]:.6f} +- {tw[k][1]:.1e}" for k in names)
    ok = all(pairwise_agree(*tw[a], *tw[b_]) for i, a in enumerate(names) for b_ in names[i + 1:])
    yield ("N=2 three-way agreement (w=1, tau=1/2, q=2)", ok,
           f"{detail}; rho {tw['rho']:.6f}; {tw['states']} MC states")

    (gv, ge), (mv, me) = simplex_n4_vs_mc(realizations=realizations, seed=seed, threads=threads)
    sig = abs(gv - mv) / math.hypot(ge, me)
    yield ("N=4 simplex vs Monte Carlo (w=3, q=2)", sig <= 3.0,
           f"I*rho: genfun {gv:.6f}, MC {mv:.6f} +- {me:.1e} ({sig:.2f} sigma)")
