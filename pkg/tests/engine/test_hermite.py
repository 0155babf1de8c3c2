"""Unit tests for Hermite polynomials, expansions and covariances."""

import math
import warnings

import numpy as np
import pytest

from wito.engine.hermite import (
    HermiteExpansion,
    HermiteTruncationWarning,
    eval_hermite,
    expand_function,
    hermite_covariance,
    hermite_table,
)
from wito.engine.oracles import bivariate_hermite_covariance, rodrigues_hermite


def test_low_order_values() -> None:
    assert eval_hermite(0, 1.7) == 1.0
    assert eval_hermite(1, 1.7) == pytest.approx(1.7)
    assert eval_hermite(2, 0.0) == -1.0
    assert eval_hermite(3, 2.0) == pytest.approx(8.0 - 6.0)
    assert eval_hermite(4, 0.0) == 3.0


def test_eval_hermite_rejects_negative_order() -> None:
    with pytest.raises(ValueError):
        eval_hermite(-1, 0.0)


@pytest.mark.parametrize("n", range(0, 9))
def test_recursion_matches_rodrigues(n: int) -> None:
    x = np.linspace(-4.0, 4.0, 41)
    np.testing.assert_allclose(eval_hermite(n, x), rodrigues_hermite(n, x), rtol=1e-9, atol=1e-9)


def test_hermite_table_rows() -> None:
    x = np.array([-1.0, 0.5, 2.0])
    table = hermite_table(5, x)
    assert table.shape == (6, 3)
    for n in range(6):
        np.testing.assert_allclose(table[n], eval_hermite(n, x))


def test_expansion_of_a_cubic() -> None:
    H = expand_function(lambda v: v ** 3, max_order=6)
    assert H.coeffs[1] == pytest.approx(3.0, abs=1e-10)
    assert H.coeffs[3] == pytest.approx(1.0, abs=1e-10)
    assert H.rank == 1
    assert H.second_moment == pytest.approx(15.0)
    assert abs(H.residual) < 1e-9


def test_expansion_of_folded_gaussian_has_rank_two_and_warns() -> None:
    mean_abs = math.sqrt(2.0 / math.pi)
    with pytest.warns(HermiteTruncationWarning):
        H = expand_function(lambda v: np.abs(v) - mean_abs, max_order=10)
    assert H.rank == 2
    assert H.coeffs[2] == pytest.approx(0.5 * mean_abs, rel=1e-2)
    assert H.residual > 0.0


def test_expansion_evaluate_matches_the_function() -> None:
    H = expand_function(lambda v: v ** 4 - 2.0 * v, max_order=6)
    x = np.linspace(-3.0, 3.0, 13)
    np.testing.assert_allclose(H.evaluate(x), x ** 4 - 2.0 * x, atol=1e-9)
    assert H(0.5) == pytest.approx(0.5 ** 4 - 1.0)


def test_from_coefficients_and_centering() -> None:
    H = HermiteExpansion.from_coefficients([2.0, 0.0, 0.5, 1.0])
    assert H.rank == 2
    assert H.second_moment == pytest.approx(0.25 * 2 + 1.0 * 6)
    assert not H.is_centered
    C = H.centered()
    assert C.is_centered and C.rank == 2
    assert H.nonzero_orders() == (2, 3)
    assert H.tail().nonzero_orders() == (3,)


def test_hermite_constructor() -> None:
    H = HermiteExpansion.hermite(3, scale=2.0)
    assert H.rank == 3
    assert H.second_moment == pytest.approx(4.0 * 6)
    with pytest.raises(ValueError):
        HermiteExpansion.hermite(0)


def test_invalid_rank_is_rejected() -> None:
    with pytest.raises(ValueError):
        HermiteExpansion(coeffs=(0.0, 1.0, 0.0), rank=2, second_moment=1.0)


def test_constant_function_has_rank_zero() -> None:
    H = HermiteExpansion.from_coefficients([1.5])
    assert H.rank == 0
    assert H.second_moment == 0.0


@pytest.mark.parametrize("r", [-0.9, -0.3, 0.0, 0.4, 0.95])
def test_covariance_matches_quadrature(r: float) -> None:
    for j in range(5):
        for l in range(5):
            exact = hermite_covariance(j, l, r)
            oracle = bivariate_hermite_covariance(j, l, r)
            assert exact == pytest.approx(oracle, abs=1e-8 * (1.0 + abs(oracle)))


def test_covariance_closed_form() -> None:
    assert hermite_covariance(3, 3, 0.5) == pytest.approx(6.0 * 0.125)
    assert hermite_covariance(2, 3, 0.5) == 0.0
    with pytest.raises(ValueError):
        hermite_covariance(1, 1, 1.5)


def test_no_warning_for_polynomials() -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("error", HermiteTruncationWarning)
        expand_function(lambda v: v ** 2 - 1.0, max_order=4)
