"""Stationary LRD fields, renormalized block sums and their limit diagnostics."""

import math
import warnings

import numpy as np
import pytest

from wito.engine.domain import CorrelationModel
from wito.engine.fields import (
    EmbeddingError,
    InsufficientReplicatesError,
    NormingError,
    RenormalizedField,
    SummabilityError,
    block_covariance_exact,
    block_stationarity,
    block_sums,
    box_covariance,
    build_simulator,
    empirical_correlation,
    f_0,
    f_n,
    lattice_sum,
    limit_diagnostics,
    norming,
    psi_limit_check,
    renormalize,
    sigma_limit,
    sigma_total,
    simulate_field,
    skewness_exact,
    subordinate,
    variance_exact,
)
from wito.engine.hermite import HermiteExpansion
from wito.engine.spectral import model_correlation

LRD = CorrelationModel(nu=1, alpha=0.5)


def _build_quietly(model, box, method):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_simulator(model, box, method)


def test_circulant_embedding_reproduces_the_correlation() -> None:
    sim = _build_quietly(LRD, (32,), "circulant")
    if sim.method == "circulant":
        row = np.real(np.fft.ifft(sim.embedding))
        np.testing.assert_allclose(row[:32], model_correlation(LRD, np.arange(32)), atol=1e-8)
        assert np.all(sim.embedding >= 0.0)
    else:
        assert sim.factor is not None


def test_box_covariance_two_dimensions() -> None:
    model = CorrelationModel(nu=2, alpha=1.0)
    cov = box_covariance(model, (3, 2))
    assert cov.shape == (6, 6)
    np.testing.assert_allclose(np.diag(cov), 1.0)
    # points (0,0) and (1,1) in row-major order
    assert cov[0, 3] == pytest.approx(3.0 ** -0.5)


@pytest.mark.parametrize("method", ["circulant", "cholesky", "spectral-synthesis"])
def test_simulated_lag_one_correlation(method: str) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sample = simulate_field(LRD, (16,), seed=11, method=method, replicates=4000)
    x = sample.values
    assert x.shape == (4000, 16)
    assert np.var(x[:, 0]) == pytest.approx(1.0, abs=0.1)
    target = 2.0 ** -0.25 if method != "spectral-synthesis" else None
    emp = float(np.mean(x[:, 3] * x[:, 4]))
    if target is not None:
        assert emp == pytest.approx(target, abs=0.09)
    else:
        assert 0.5 < emp < 1.0


def test_simulation_is_reproducible_across_workers() -> None:
    a = simulate_field(LRD, (8,), seed=5, method="cholesky", replicates=40, block=16, workers=1)
    b = simulate_field(LRD, (8,), seed=5, method="cholesky", replicates=40, block=16, workers=2)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_field(LRD, (8,), seed=6, method="cholesky", replicates=40)
    assert not np.array_equal(a.values, c.values)


def test_white_noise_field() -> None:
    sample = simulate_field(CorrelationModel.white(2), (4, 6), seed=0, replicates=3)
    assert sample.values.shape == (3, 4, 6)
    assert sample.replicates == 3


def test_simulator_validation() -> None:
    with pytest.raises(ValueError):
        build_simulator(LRD, (8,), "fft")
    with pytest.raises(ValueError):
        build_simulator(LRD, (8, 8), "circulant")
    with pytest.raises(EmbeddingError):
        build_simulator(LRD, (5000,), "cholesky")


def test_subordinate_centres_the_field() -> None:
    sample = simulate_field(CorrelationModel.white(1), (10,), seed=2, replicates=2)
    H = HermiteExpansion.from_coefficients([3.0, 0.0, 1.0])
    out = subordinate(sample, H)
    np.testing.assert_allclose(out.values, sample.values ** 2 - 1.0)
    assert out.subordinator.startswith("hermite")
    squared = subordinate(sample, np.square)
    np.testing.assert_allclose(squared.values, sample.values ** 2 - 1.0, atol=1e-10)


def test_norming_regimes() -> None:
    assert norming(LRD, 16, "central") == pytest.approx(4.0)
    assert norming(LRD, 16, "noncentral") == pytest.approx(16.0 ** 0.75)
    model = CorrelationModel(nu=2, alpha=0.5)
    assert norming(model, 4, "noncentral", k=2) == pytest.approx(4.0 ** 1.5)
    with pytest.raises(NormingError):
        norming(LRD, 16, "noncentral", k=2)
    with pytest.raises(ValueError):
        norming(LRD, 16, "mixed")
    with pytest.raises(ValueError):
        norming(LRD, 0, "central")


def test_block_sums() -> None:
    values = np.arange(2 * 4 * 6, dtype=float).reshape(2, 4, 6)
    sums = block_sums(values, 2)
    assert sums.shape == (2, 2, 3)
    assert sums[0, 0, 0] == values[0, :2, :2].sum()
    assert sums[1, 1, 2] == values[1, 2:, 4:].sum()
    with pytest.raises(ValueError):
        block_sums(values, 3)


@pytest.mark.parametrize("method", ["circulant", "cholesky"])
@pytest.mark.parametrize("lag", [0, 1, 4, 16])
def test_simulated_correlation_within_standard_errors(method: str, lag: int) -> None:
    model = CorrelationModel(nu=1, alpha=0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sample = simulate_field(model, (1024,), seed=23, method=method, replicates=400)
    (cmp,) = empirical_correlation(sample, [lag])
    expected = 1.0 if lag == 0 else lag ** -0.3
    assert cmp.expected == pytest.approx(expected)
    assert cmp.replicates == 400
    assert cmp.passed(4.0), f"{cmp.label}: {cmp.mc:.4f} vs {cmp.expected:.4f} (se {cmp.se:.4f})"


def test_simulated_correlation_two_dimensions() -> None:
    model = CorrelationModel(nu=2, alpha=0.8)
    sample = simulate_field(model, (32, 32), seed=5, method="circulant", replicates=400)
    for cmp in empirical_correlation(sample, [0, 1, 4]):
        assert cmp.passed(4.0), cmp


def test_empirical_correlation_validation() -> None:
    sample = simulate_field(LRD, (16,), seed=1, method="cholesky", replicates=4)
    with pytest.raises(ValueError):
        empirical_correlation(sample, [16])
    with pytest.raises(ValueError):
        empirical_correlation(subordinate(sample, HermiteExpansion.hermite(2)), [1])


def test_renormalize_divides_by_norming() -> None:
    sample = simulate_field(LRD, (8,), seed=1, method="cholesky", replicates=2)
    field = renormalize(sample, 4, "central")
    assert field.norming == pytest.approx(2.0)
    np.testing.assert_allclose(field.values, block_sums(sample.values, 4) / 2.0)


@pytest.mark.slow
def test_renormalized_blocks_share_their_moments() -> None:
    model = CorrelationModel(nu=1, alpha=0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sample = simulate_field(model, (512,), seed=17, method="circulant", replicates=2000)
    Z = renormalize(subordinate(sample, HermiteExpansion.hermite(2)), 128, "noncentral", k=2)
    assert Z.values.shape == (2000, 4)
    report = block_stationarity(Z)
    assert len(report.reports) == 4
    assert report.max_z < 4.0, report.worst


def test_block_stationarity_flags_a_rescaled_block() -> None:
    rng = np.random.default_rng(8)
    values = rng.standard_normal((4000, 3))
    values[:, 2] *= 1.5
    field = RenormalizedField(N=4, norming=1.0, regime="central", values=values)
    report = block_stationarity(field)
    assert report.max_z > 4.0
    assert report.worst.startswith("block 2")
    with pytest.raises(ValueError):
        block_stationarity(RenormalizedField(N=4, norming=1.0, regime="central", values=values[:, :1]))


def test_exact_variance_matches_covariance_sum() -> None:
    H = HermiteExpansion.hermite(1)
    for model, N in [(LRD, 12), (CorrelationModel(nu=2, alpha=0.8), 5)]:
        cov = box_covariance(model, (N,) * model.nu)
        assert variance_exact(model, H, N) == pytest.approx(float(cov.sum()), rel=1e-12)
        assert block_covariance_exact(model, H, N, (0,) * model.nu) == pytest.approx(float(cov.sum()), rel=1e-12)
    H2 = HermiteExpansion.hermite(2)
    cov = box_covariance(LRD, (6,))
    assert variance_exact(LRD, H2, 6, A_N=2.0) == pytest.approx(2.0 * float((cov ** 2).sum()) / 4.0)


def test_block_covariance_decays() -> None:
    H = HermiteExpansion.hermite(1)
    near = block_covariance_exact(LRD, H, 8, 1)
    far = block_covariance_exact(LRD, H, 8, 10)
    assert 0.0 < far < near


def test_skewness_exact() -> None:
    white = CorrelationModel.white(1)
    assert skewness_exact(white, 2, 9) == pytest.approx(2.0 * math.sqrt(2.0) / 3.0)
    assert skewness_exact(LRD, 3, 8) == 0.0
    s = [skewness_exact(CorrelationModel(nu=1, alpha=0.8), 2, N) for N in (8, 16, 32)]
    assert s[0] > s[1] > s[2] > 0.0


def test_lattice_sum_and_summability() -> None:
    assert lattice_sum(CorrelationModel.white(1), 3) == (1.0, 0.0)
    with pytest.raises(SummabilityError):
        lattice_sum(LRD, 1)
    value, ratio = lattice_sum(CorrelationModel(nu=1, alpha=0.8), 2)
    assert value > 1.0
    assert 0.0 < ratio < 1.0


def test_block_limit_matches_lattice_sum() -> None:
    lim = sigma_limit(CorrelationModel(nu=1, alpha=0.8), 2, (512, 1024))
    assert lim.relative_gap < 0.05
    assert lim.sigma_sq == pytest.approx(lim.lattice / 2.0)
    with pytest.raises(ValueError):
        sigma_limit(LRD, 0, (8, 16))


def test_sigma_total_sums_orders() -> None:
    model = CorrelationModel(nu=1, alpha=0.8)
    H = HermiteExpansion.from_coefficients([0.0, 0.0, 1.0, 0.5])
    expected = 2.0 * lattice_sum(model, 2)[0] + 0.25 * 6.0 * lattice_sum(model, 3)[0]
    assert sigma_total(H, model) == pytest.approx(expected)


def test_limit_diagnostics_on_gaussian_and_skewed_samples() -> None:
    rng = np.random.default_rng(3)
    x = rng.standard_normal(20_000)
    report = limit_diagnostics(x)
    assert report.replicates == 20_000
    assert abs(report.mean) < 4.0 * report.mean_se
    assert report.variance == pytest.approx(1.0, abs=4.0 * report.variance_se)
    assert report.gaussian
    skewed = limit_diagnostics(x ** 2 - 1.0)
    assert not skewed.gaussian
    assert skewed.skewness == pytest.approx(2.0 * math.sqrt(2.0), abs=4.0 * skewed.skewness_se)
    assert set(report.as_dict()) >= {"mean", "skewness", "excess_kurtosis_se"}
    with pytest.raises(InsufficientReplicatesError):
        limit_diagnostics(x[:10])


def test_f_n_approaches_f_0() -> None:
    model = CorrelationModel(nu=1, alpha=0.3)
    x = np.array([0.1, -0.4])
    np.testing.assert_allclose(f_n(model, [0.5], 10_000, x), f_0(model, [0.5], x), rtol=1e-3)


def test_psi_limit_one_dimension() -> None:
    model = CorrelationModel(nu=1, alpha=0.3)
    res = psi_limit_check(model, [0.2, 0.5], (16, 64, 256))
    assert res.gaps[-1] < res.gaps[0]
    assert math.isfinite(res.psi_0) and res.psi_0 > 0.0
    assert 0.0 < res.ball_mass <= res.ball_bound


def test_psi_limit_ball_mass_two_dimensions() -> None:
    model = CorrelationModel(nu=2, alpha=0.6)
    # both points at the origin: f_0 <= |x|^{-1.2} near the centre, so the bound is attained up to O(eps)
    res = psi_limit_check(model, [(0.0, 0.0), (0.0, 0.0)], (8,))
    assert math.isfinite(res.ball_mass)
    assert 0.0 < res.ball_mass <= res.ball_bound
    assert res.ball_mass == pytest.approx(res.ball_bound, rel=1e-2)
    spread = psi_limit_check(model, [(0.0, 0.0), (0.5, 0.5)], (8,))
    assert math.isfinite(spread.ball_mass) and spread.ball_mass > 0.0
    assert math.isfinite(spread.psi_0)


def test_psi_limit_needs_summable_product() -> None:
    with pytest.raises(NormingError):
        psi_limit_check(LRD, [0.1, 0.2], (8,))
