import math

import numpy as np
import pytest

from wito.engine.domain import FbmSpec
from wito.engine.fbm import (
    build_fbm_simulator,
    check_self_similarity,
    check_stationary_increments,
    covariance,
    covariance_check,
    covariance_matrix,
    fgn_autocovariance,
    increment_correlation,
    increment_variance_defect,
    simulate,
    spectral_constant,
    spectral_covariance,
    spectral_oracle_constant,
)


def test_spec_validation() -> None:
    with pytest.raises(ValueError):
        FbmSpec(hurst=1.0, times=(1.0,))
    with pytest.raises(ValueError):
        FbmSpec(hurst=0.5, times=(0.5, 0.5))
    with pytest.raises(ValueError):
        FbmSpec(hurst=0.5, times=(-1.0, 1.0))
    with pytest.raises(ValueError):
        FbmSpec(hurst=0.5, times=())
    spec = FbmSpec.uniform(0.3, 5, 2.0)
    assert spec.times == pytest.approx((0.0, 0.5, 1.0, 1.5, 2.0))
    assert FbmSpec.uniform(0.3, 4, include_zero=False).times == pytest.approx((0.25, 0.5, 0.75, 1.0))


def test_covariance_values() -> None:
    spec = FbmSpec(hurst=0.75, times=(1.0,), scale=2.0)
    assert covariance(spec, 4.0, 4.0) == pytest.approx(2.0 * 8.0)
    assert covariance(spec, 0.0, 3.0) == 0.0
    brownian = FbmSpec(hurst=0.5, times=(1.0,))
    assert covariance(brownian, 2.0, 5.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        covariance(spec, -1.0, 1.0)


@pytest.mark.parametrize("hurst", [0.2, 0.5, 0.8])
def test_covariance_identities(hurst: float) -> None:
    spec = FbmSpec.uniform(hurst, 17)
    for a in (0.5, 3.0):
        assert check_self_similarity(spec, a) < 1e-12
    for u in (0.0, 0.25, 2.0):
        assert check_stationary_increments(spec, u) < 1e-12
    assert increment_variance_defect(spec) < 1e-12
    with pytest.raises(ValueError):
        check_self_similarity(spec, 0.0)
    with pytest.raises(ValueError):
        check_stationary_increments(spec, -1.0)


def test_fgn_autocovariance() -> None:
    spec = FbmSpec(hurst=0.7, times=(1.0,))
    rho = fgn_autocovariance(spec, 1.0, [0, 1, -1])
    assert rho[0] == pytest.approx(1.0)
    assert rho[1] == pytest.approx(0.5 * (2.0 ** 1.4 - 2.0))
    assert rho[1] == rho[2]
    brownian = FbmSpec(hurst=0.5, times=(1.0,))
    np.testing.assert_allclose(fgn_autocovariance(brownian, 0.1, [1, 2, 5]), 0.0, atol=1e-15)


@pytest.mark.parametrize("method", ["cholesky", "circulant-fgn"])
def test_simulated_paths_have_fbm_covariance(method: str) -> None:
    spec = FbmSpec.uniform(0.7, 33)
    paths = simulate(spec, seed=9, method=method, replicates=4000)
    assert paths.shape == (4000, 33)
    np.testing.assert_array_equal(paths[:, 0], 0.0)
    check = covariance_check(spec, paths, thin=8)
    assert check.pairs == 10
    assert check.passed()
    broken = covariance_check(spec, 2.0 * paths, thin=8)
    assert not broken.passed()


def test_circulant_paths_without_zero() -> None:
    spec = FbmSpec.uniform(0.3, 16, include_zero=False)
    paths = simulate(spec, seed=1, method="circulant-fgn", replicates=3)
    assert paths.shape == (3, 16)
    assert np.all(paths[:, 0] != 0.0)


def test_simulation_reproducible_across_workers() -> None:
    spec = FbmSpec.uniform(0.6, 20)
    a = simulate(spec, seed=3, replicates=30, block=8, workers=1)
    b = simulate(spec, seed=3, replicates=30, block=8, workers=2)
    np.testing.assert_array_equal(a, b)


def test_simulator_validation() -> None:
    spec = FbmSpec(hurst=0.4, times=(0.0, 0.1, 0.3))
    with pytest.raises(ValueError):
        build_fbm_simulator(spec, "circulant-fgn")
    with pytest.raises(ValueError):
        build_fbm_simulator(spec, "hosking")


def test_increment_correlation_sign() -> None:
    for hurst in (0.3, 0.7):
        spec = FbmSpec.uniform(hurst, 64)
        corr, se = increment_correlation(simulate(spec, seed=2, method="circulant-fgn", replicates=500))
        assert corr == pytest.approx(0.5 * (2.0 ** (2.0 * hurst) - 2.0), abs=0.05)
        assert se > 0.0


def test_spectral_covariance_of_brownian_motion() -> None:
    value = spectral_covariance(0.5, 1.0, 2.0)
    assert value.real == pytest.approx(2.0 * math.pi, rel=1e-3)
    assert abs(value.imaginary) < 1e-5
    assert spectral_covariance(0.5, 0.0, 2.0).real == 0.0
    with pytest.raises(ValueError):
        spectral_covariance(1.2, 1.0, 1.0)


@pytest.mark.parametrize("hurst", [0.25, 0.5, 0.75])
def test_spectral_constant(hurst: float) -> None:
    res = spectral_constant(hurst, [(0.5, 1.0), (1.0, 1.0), (1.0, 3.0)])
    assert res.spread < 1e-3
    assert res.constant == pytest.approx(res.oracle, rel=1e-3)
    assert spectral_oracle_constant(0.5) == pytest.approx(2.0 * math.pi)
