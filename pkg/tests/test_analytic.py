import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simloc.analytic import (
    AnalyticMomentQuery,
    FiniteNQuery,
    f_kernel,
    g_kernel,
    iq_finite_n,
    iq_thermo,
    iq_thermo_two_path,
    log_argument,
    log_of_log_argument,
    rho0,
)
from simloc.errors import DomainError, InvalidInputError
from simloc.specfun import MomentOrder, f_q_closed


def query(q, w):
    return AnalyticMomentQuery(MomentOrder(float(q)), float(w))


def test_f_kernel_examples():
    assert f_kernel(0.0, 0.0) == pytest.approx(1.0, abs=1e-13)
    assert f_kernel(1.0, 0.0) == pytest.approx(math.exp(-math.sqrt(2.0)), rel=1e-12)
    v = f_kernel(0.7, 1.3)
    assert f_kernel(0.7, -1.3) == pytest.approx(v, abs=1e-12)
    assert f_kernel(-0.7, 1.3) == pytest.approx(v, abs=1e-12)


def test_f_kernel_against_oracle(oracles):
    for s, th, ref in oracles["f_kernel"]:
        assert f_kernel(s, th) == pytest.approx(ref, abs=1e-12), (s, th)


def test_f_kernel_continuous_at_zero_s():
    th = np.array([0.4, 1.3, 5.0])
    np.testing.assert_allclose(f_kernel(1e-7, th), f_kernel(0.0, th), atol=1e-6)


@given(st.floats(0.0, 5.0), st.floats(-20, 20))
def test_f_kernel_bounded_by_value_at_zero_theta(s, th):
    assert abs(f_kernel(s, th)) <= f_kernel(s, 0.0) + 1e-13


def test_g_kernel_example():
    ref = math.sqrt(math.pi) * math.exp(-math.sqrt(2.0)) * (0.5 + 1 / math.sqrt(2.0))
    assert g_kernel(1.0, 0.0, 2) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(DomainError):
        g_kernel(0.0, 1.0, 2)


def test_g_kernel_against_oracle(oracles):
    for s, th, q, ref in oracles["g_kernel"]:
        scale = g_kernel(s, 0.0, q)
        assert abs(g_kernel(s, th, q) - ref) <= 1e-11 * scale, (s, th, q)


@given(st.floats(0.05, 4.0), st.floats(0, 30), st.sampled_from([2, 3, 2.5]))
def test_g_kernel_maximal_at_zero_theta(s, th, q):
    assert abs(g_kernel(s, th, q)) <= g_kernel(s, 0.0, q) * (1 + 1e-12)


def test_g_kernel_large_n_scaling():
    # g(t/N, a/N) N**(1-2q) t**(2q-1) -> F_q(a/(2t)) with an O(1/N**2) remainder
    t, a, q = 1.5, 2.0, 2
    target = f_q_closed(q, a / (2 * t))
    ns = np.array([20.0, 40.0, 80.0])
    dev = np.array([abs(g_kernel(t / n, a / n, q) * n ** (1 - 2 * q) * t ** (2 * q - 1) - target)
                    for n in ns])
    order = np.polyfit(np.log(ns), np.log(dev), 1)[0]
    assert -order >= 1.9


def test_f_kernel_large_n_expansion():
    # N (1 - f(t/N, a/N)) -> sqrt(2/pi) int_0^inf (1 - exp(-t^2 x^2) cos(a x)) / x^2 dx
    t, a = 1.5, 2.0
    c = 2.0 * t
    limit = math.sqrt(2 / math.pi) * (
        math.sqrt(math.pi) * t
        + 0.5 * math.pi * (a * math.erf(a / c) + c / math.sqrt(math.pi) * (math.exp(-(a / c) ** 2) - 1))
    )
    ns = np.array([50, 100, 200, 400])
    dev = np.abs([n * (1 - f_kernel(t / n, a / n)) - limit for n in ns])
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 0.02
    # first-order remainder
    assert np.all(np.abs(dev[:-1] / dev[1:] - 2.0) < 0.1)


def test_rho0_examples():
    assert rho0(3.0) == pytest.approx(0.1329808, abs=1e-7)
    assert rho0(1 / math.sqrt(2 * math.pi)) == pytest.approx(1.0, rel=1e-15)
    assert rho0(0.01) == pytest.approx(39.8942, abs=1e-4)
    with pytest.raises(DomainError):
        rho0(0.0)


@given(st.floats(0.0, 1e6), st.floats(1e-3, 1e4))
def test_log_of_log_argument(z, w):
    assume_small = z < 1e3
    got = float(log_of_log_argument(z, w)[0])
    if assume_small:
        assert got == pytest.approx(math.log(float(log_argument(z, w))), rel=1e-12, abs=1e-12)
    assert math.isfinite(got)


def test_thermo_against_oracle(oracles):
    for q, w, ref in oracles["thermo"]:
        assert iq_thermo(query(q, w)).value == pytest.approx(ref, rel=1e-8), (q, w)


def test_thermo_integer_and_real_paths_agree():
    q = query(3, 3.0)
    a = iq_thermo(q, path="integer").value
    b = iq_thermo(q, path="tilde").value
    assert a == pytest.approx(b, rel=1e-8)
    with pytest.raises(DomainError):
        iq_thermo(query(2.5, 3.0), path="integer")
    with pytest.raises(InvalidInputError):
        iq_thermo(q, path="other")


@pytest.mark.parametrize("q", [2, 3, 2.5])
def test_thermo_log_scale_invariance(q):
    a = iq_thermo(query(q, 3.0)).value
    b = iq_thermo(query(q, 3.0), log_scale=2.0).value
    assert abs(a - b) < 1e-8


def test_strong_disorder_limit():
    for q in (2, 3, 4):
        vals = [iq_thermo(query(q, w)).value for w in (1e2, 1e3, 1e4)]
        assert vals[0] < vals[1] < vals[2] < 1.0
        assert abs(vals[2] - 1.0) <= 0.01


@given(st.floats(0.01, 100.0), st.sampled_from([2, 3, 4, 2.5]))
def test_thermo_bounded(w, q):
    v = iq_thermo(query(q, w)).value
    assert 0.0 < v < 1.0


def test_thermo_increases_with_disorder():
    vals = [iq_thermo(query(2, w)).value for w in (0.01, 0.1, 1.0, 3.0, 10.0)]
    assert np.all(np.diff(vals) > 0)


def test_two_path_agreement():
    chk = iq_thermo_two_path(query(2, 3.0))
    assert chk.deviation <= 1e-4 * chk.direct


def test_finite_n_requires_even_n():
    with pytest.raises(InvalidInputError):
        FiniteNQuery(MomentOrder(2.0), 3.0, 33)
    with pytest.raises(DomainError):
        FiniteNQuery(MomentOrder(2.5), 3.0, 32)


def test_finite_n_converges_to_thermo():
    ref = iq_thermo(query(2, 3.0)).value
    dev = [abs(iq_finite_n(FiniteNQuery(MomentOrder(2.0), 3.0, n)).value - ref)
           for n in (32, 64, 128)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] <= 0.05 * ref
    # roughly halves with each doubling of N
    assert 1.6 < dev[0] / dev[1] < 2.5
