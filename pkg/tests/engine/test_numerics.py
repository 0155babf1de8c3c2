"""Shared quadrature helpers."""

import math

import numpy as np
import pytest

from wito.engine.numerics import (
    QuadratureError,
    alg_quad,
    gauss_hermite_rule,
    gaussian_expectation,
    power_cos_tail,
    quad,
    richardson,
)


def test_gauss_hermite_rule_is_normalised() -> None:
    nodes, weights = gauss_hermite_rule(10)
    assert weights.sum() == pytest.approx(1.0)
    assert gaussian_expectation(lambda x: x ** 4, 10) == pytest.approx(3.0)
    assert gaussian_expectation(lambda x: x ** 6, 4) == pytest.approx(15.0)
    with pytest.raises(ValueError):
        gauss_hermite_rule(0)


def test_alg_quad_integrates_endpoint_singularity() -> None:
    value, _ = alg_quad(lambda x: 1.0, 0.0, 1.0, exp_a=-0.5)
    assert value == pytest.approx(2.0)
    assert alg_quad(lambda x: 1.0, 1.0, 0.0) == (0.0, 0.0)


def test_power_cos_tail() -> None:
    assert power_cos_tail(-2.0, 0.0, 2.0) == pytest.approx(0.5)
    assert math.isinf(power_cos_tail(-0.5, 0.0, 1.0))
    value = power_cos_tail(-2.0, 1.0, 1.0)
    reference, _ = quad(lambda x: math.cos(x) / x ** 2, 1.0, 2000.0, limit=4000)
    assert value == pytest.approx(reference, abs=1e-5)
    with pytest.raises(ValueError):
        power_cos_tail(-1.0, 1.0, 0.0)


def test_strict_quad_raises() -> None:
    with pytest.raises(QuadratureError):
        quad(lambda x: 1.0 / x, 0.0, 1.0, strict=True, limit=5)


def test_richardson_removes_leading_error() -> None:
    exact = 1.0
    coarse = exact + 0.1 * 0.5 ** 2
    fine = exact + 0.1 * 0.25 ** 2
    assert richardson(coarse, fine, order=2) == pytest.approx(exact)
    assert richardson(coarse, fine, order=0) == fine


def test_power_cos_tail_requires_negative_power() -> None:
    with pytest.raises(ValueError):
        power_cos_tail(0.5, 1.0, 1.0)
    assert np.isfinite(power_cos_tail(-0.5, 2.0, 1.0))
