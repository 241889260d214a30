import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simloc.analytic import rho0
from simloc.checks import random_tvector
from simloc.errors import DomainError, InvalidInputError, UnsupportedDimensionError
from simloc.genfun import (
    GenFunProblem,
    b_hat,
    b_matrix,
    det_b_simplex_closed,
    dos_definition_oracle,
    extrapolate_eta,
    iq_definition_oracle,
    iq_genfun_mapped,
    iq_genfun_nested,
    iq_genfun_small_n,
)
from simloc.model import build_uniform_hopping


def test_b_matrix_zero_diagonal_example():
    tau = 0.3
    p = GenFunProblem.generic(build_uniform_hopping(3, tau), 1.0)
    b = b_hat(p, [1.0, 1.0, 1.0])
    np.testing.assert_allclose(np.diag(b), 2 * tau)
    np.testing.assert_allclose(b[~np.eye(3, dtype=bool)], -tau)
    assert b_matrix(p, [1.0, 1.0, 1.0]).shape == (2, 2)


def test_b_matrix_simplex_n2():
    p = GenFunProblem.simplex(2, 1.0)
    t1, t2 = 0.7, -1.9
    np.testing.assert_allclose(b_matrix(p, [t1, t2]), [[t1 / (2 * t2)]], rtol=1e-15)


def test_det_examples():
    p = GenFunProblem.simplex(3, 1.0)
    assert det_b_simplex_closed([1, 2, 3], 1, 3) == pytest.approx(1 / 9, rel=1e-14)
    assert np.linalg.det(b_matrix(p, [1, 2, 3])) == pytest.approx(1 / 9, rel=1e-13)
    np.testing.assert_allclose(b_matrix(p, [1, 2, 3]), [[2 / 3, -1 / 3], [-1 / 3, 1 / 3]], atol=1e-15)
    assert det_b_simplex_closed([1, 2], 1, 2) == pytest.approx(0.25)
    assert det_b_simplex_closed([1, -1, 2, -2], 1, 4) == 0.0


@given(st.integers(2, 8), st.integers(0, 2**32), st.data())
def test_det_identity(n, seed, data):
    t = random_tvector(np.random.default_rng(seed), n)
    site = data.draw(st.integers(1, n))
    p = GenFunProblem.simplex(n, 1.0, site=site)
    closed = det_b_simplex_closed(t, site, n)
    brute = np.linalg.det(b_matrix(p, t))
    assert brute == pytest.approx(closed, rel=1e-10, abs=1e-300)


@given(st.integers(2, 6), st.integers(0, 2**32), st.floats(0.1, 10.0))
def test_b_scale_invariant(n, seed, c):
    t = random_tvector(np.random.default_rng(seed), n)
    p = GenFunProblem.simplex(n, 1.0)
    np.testing.assert_allclose(b_matrix(p, c * t), b_matrix(p, t), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(b_matrix(p, -c * t), b_matrix(p, t), rtol=1e-13, atol=1e-13)


@given(st.integers(2, 8), st.integers(0, 2**32))
def test_zero_mode(n, seed):
    t = random_tvector(np.random.default_rng(seed), n)
    b = b_hat(GenFunProblem.simplex(n, 1.0), t)
    z = t / np.linalg.norm(t)
    assert np.linalg.norm(b @ z) <= 1e-12 * max(1.0, np.linalg.norm(b))


def test_invalid_inputs():
    p = GenFunProblem.simplex(3, 1.0)
    with pytest.raises(DomainError):
        b_matrix(p, [1.0, 0.0, 2.0])
    with pytest.raises(InvalidInputError):
        GenFunProblem.simplex(3, 1.0, site=4)
    with pytest.raises(DomainError):
        GenFunProblem.simplex(3, 0.0)
    with pytest.raises(UnsupportedDimensionError):
        iq_genfun_small_n(GenFunProblem.simplex(5, 3.0), 2, rho0(3.0))
    with pytest.raises(DomainError):
        iq_genfun_small_n(GenFunProblem.simplex(2, 3.0), 2.5, rho0(3.0))
    with pytest.raises(InvalidInputError):
        iq_genfun_small_n(GenFunProblem.simplex(2, 3.0), 2, rho0(3.0), method="other")
    with pytest.raises(UnsupportedDimensionError):
        iq_definition_oracle(p, 2, 0.1)


def test_oracle_q1_normalization():
    for w, e in ((1.0, 0.0), (0.4, 0.3), (3.0, -1.0)):
        p = GenFunProblem.generic(build_uniform_hopping(2, 0.5), w, energy=e)
        for eta in (0.2, 0.05):
            assert iq_definition_oracle(p, 1.0, eta * w) == pytest.approx(1.0, abs=1e-8)


def test_oracle_strong_disorder():
    w = 50.0
    p = GenFunProblem.generic(build_uniform_hopping(2, 0.5), w)
    etas = [f * w for f in (0.2, 0.1, 0.05)]
    val = extrapolate_eta(etas, [iq_definition_oracle(p, 2, e) for e in etas])
    assert val == pytest.approx(1.0, rel=0.02)


def test_oracle_eta_stability():
    w = 1.0
    p = GenFunProblem.generic(build_uniform_hopping(2, 0.5), w)
    a = iq_definition_oracle(p, 2, 0.1 * w)
    b = iq_definition_oracle(p, 2, 0.05 * w)
    assert abs(a - b) <= 0.01 * b


def test_oracle_site_symmetry():
    base = build_uniform_hopping(2, 0.5)
    a = iq_definition_oracle(GenFunProblem.generic(base, 1.0, 0.2, site=1), 2, 0.05)
    b = iq_definition_oracle(GenFunProblem.generic(base, 1.0, 0.2, site=2), 2, 0.05)
    assert a == pytest.approx(b, rel=1e-8)


def test_extrapolate_eta_exact_for_quadratic():
    etas = np.array([0.2, 0.1, 0.05])
    assert extrapolate_eta(etas, 3.0 - 2.0 * etas**2 + etas**4) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        extrapolate_eta([0.1], [1.0])


def test_nested_matches_oracle_n2():
    w = 1.0
    p = GenFunProblem.generic(build_uniform_hopping(2, 0.5), w)
    etas = [f * w for f in (0.2, 0.1, 0.05)]
    rho = extrapolate_eta(etas, [dos_definition_oracle(p, e) for e in etas])
    oracle = extrapolate_eta(etas, [iq_definition_oracle(p, 2, e) for e in etas])
    gf = iq_genfun_small_n(p, 2, rho)
    assert gf.value == pytest.approx(oracle, rel=1e-4)


def test_nested_and_mapped_agree_n2():
    p = GenFunProblem.simplex(2, 3.0)
    a = iq_genfun_nested(p, 2, rho0(3.0))
    b = iq_genfun_mapped(p, 2, rho0(3.0))
    assert abs(a.value - b.value) <= 3 * math.hypot(a.error_estimate, b.error_estimate) + 1e-6


def test_mapped_reproducible():
    p = GenFunProblem.simplex(3, 3.0)
    a = iq_genfun_mapped(p, 2, rho0(3.0), rel_tol=1e-3)
    b = iq_genfun_mapped(p, 2, rho0(3.0), rel_tol=1e-3)
    assert a == b


@pytest.mark.slow
def test_site_symmetry_n4():
    r = rho0(3.0)
    a = iq_genfun_mapped(GenFunProblem.simplex(4, 3.0, site=1), 2, r, rel_tol=1e-3)
    b = iq_genfun_mapped(GenFunProblem.simplex(4, 3.0, site=2), 2, r, rel_tol=1e-3, seed=1)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.error_estimate, b.error_estimate)
