"""The reference computations agree with closed forms."""

import math

import numpy as np
import pytest

from wito.engine.chaos import uniform_system
from wito.engine.diagrams import GridKernel
from wito.engine.oracles import (
    MAX_WICK_TUPLES,
    bivariate_hermite_covariance,
    hermite_moment_quadrature,
    rodrigues_polynomial,
    wick_expectation,
)


def test_rodrigues_coefficients() -> None:
    np.testing.assert_allclose(rodrigues_polynomial(3).coef, [0.0, -3.0, 0.0, 1.0])
    np.testing.assert_allclose(rodrigues_polynomial(4).coef, [3.0, 0.0, -6.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        rodrigues_polynomial(-1)


def test_bivariate_covariance_closed_form() -> None:
    assert bivariate_hermite_covariance(2, 2, 0.5) == pytest.approx(2.0 * 0.25, abs=1e-12)
    assert bivariate_hermite_covariance(1, 3, 0.7) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        bivariate_hermite_covariance(1, 1, 1.2)


def test_moment_quadrature_single_variable() -> None:
    assert hermite_moment_quadrature((4,), [[1.0]]) == pytest.approx(0.0, abs=1e-10)
    assert hermite_moment_quadrature((2, 2), np.eye(2)) == pytest.approx(0.0, abs=1e-12)
    assert hermite_moment_quadrature((2, 2), [[1.0, 1.0], [1.0, 1.0]]) == pytest.approx(2.0)


def test_moment_quadrature_rejects_bad_shapes() -> None:
    with pytest.raises(ValueError):
        hermite_moment_quadrature((1, 1), np.eye(3))


def test_wick_first_chaos_variance() -> None:
    system = uniform_system(1, 4)
    g = system.masses
    f = GridKernel(system, np.array([1.0, 2.0, 1.0, 2.0], dtype=complex))
    # E |sum f Z|^2 with Z_{p+M} = conj Z_p is sum_p f(p) f(-p) g_p
    expected = float(np.sum(f.values * f.values[system.neg] * g).real)
    assert wick_expectation([f, f]).real == pytest.approx(expected)


def test_wick_guard() -> None:
    system = uniform_system(1, 8)
    f = GridKernel(system, np.ones((8,) * 4, dtype=complex))
    assert 8 ** 8 > MAX_WICK_TUPLES
    with pytest.raises(ValueError):
        wick_expectation([f, f])


def test_wick_scalar_kernels() -> None:
    system = uniform_system(1, 4)
    c = GridKernel(system, np.array(2.5 + 0.0j))
    assert wick_expectation([c, c]) == pytest.approx(6.25)
    assert math.isclose(wick_expectation([c]).real, 2.5)
