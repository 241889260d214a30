import math

import numpy as np
import pytest

from simloc.errors import IntegrandError, UnsupportedDimensionError
from simloc.quadrature import integrate_1d, integrate_2d, integrate_nd

INF = math.inf


def test_1d_examples():
    r = integrate_1d(lambda x: x * x, 0.0, 1.0)
    assert r.converged
    assert r.value == pytest.approx(1 / 3, abs=1e-12)
    r = integrate_1d(lambda x: np.exp(-0.5 * x * x), -INF, INF)
    assert r.value == pytest.approx(math.sqrt(2 * math.pi), abs=1e-10)
    r = integrate_1d(lambda x: np.exp(-x) * np.cos(10 * x), 0.0, INF)
    assert r.value == pytest.approx(1 / 101, abs=1e-9)


def test_1d_error_estimate_is_honest():
    r = integrate_1d(lambda x: np.sqrt(x), 0.0, 1.0, rel_tol=1e-9)
    assert abs(r.value - 2 / 3) <= max(r.error_estimate, 1e-15) * 10
    assert r.error_estimate <= 1e-9


def test_breakpoints_handle_kinks():
    r = integrate_1d(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=(0.3,))
    assert r.value == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-14)


def test_reversed_limits():
    assert integrate_1d(lambda x: x, 1.0, 0.0).value == pytest.approx(-0.5, abs=1e-14)


def test_nan_integrand_reports_abscissa():
    with pytest.raises(IntegrandError) as info:
        integrate_1d(lambda x: np.where(x > 0.5, np.nan, 1.0), 0.0, 1.0)
    assert info.value.abscissa is not None
    assert info.value.abscissa > 0.5


def test_budget_exhaustion_is_flagged():
    r = integrate_1d(lambda x: np.sin(1.0 / x), 1e-6, 1.0, max_evals=300)
    assert not r.converged
    assert r.evaluations <= 300 + 15 * 4
    assert math.isfinite(r.value)


def test_2d_examples():
    r = integrate_2d(lambda x, y: x * y, (0, 1), (0, 1))
    assert r.value == pytest.approx(0.25, abs=1e-10)
    r = integrate_2d(lambda x, y: np.exp(-x * x - y * y), (-INF, INF), (-INF, INF))
    assert r.value == pytest.approx(math.pi, abs=1e-8)
    r = integrate_2d(lambda x, y: np.exp(-x - y) * np.cos(x + y), (0, INF), (0, INF))
    assert r.value == pytest.approx(0.0, abs=1e-8)


def test_2d_variable_inner_range():
    # area of the unit triangle
    r = integrate_2d(lambda x, y: np.ones_like(y), (0, 1), lambda x: (0.0, 1.0 - x))
    assert r.value == pytest.approx(0.5, abs=1e-12)


def test_nd_examples():
    r = integrate_nd(lambda x, y, z: np.ones_like(z), [(0, 1)] * 3)
    assert r.value == pytest.approx(1.0, abs=1e-12)
    r = integrate_nd(lambda x, y, z: np.exp(-(x * x + y * y + z * z)), [(-INF, INF)] * 3)
    assert r.value == pytest.approx(math.pi**1.5, abs=1e-6)
    r = integrate_nd(lambda x, y: np.exp(-x * x - y * y) * (x * x + y * y), [(-INF, INF)] * 2)
    assert r.value == pytest.approx(math.pi, abs=1e-6)


def test_nd_dimension_limit():
    with pytest.raises(UnsupportedDimensionError):
        integrate_nd(lambda *x: x[-1], [(0, 1)] * 4)


def test_deterministic():
    f = lambda x: np.exp(-x) * np.cos(3 * x)
    a = integrate_1d(f, 0.0, INF)
    b = integrate_1d(f, 0.0, INF)
    assert a == b
