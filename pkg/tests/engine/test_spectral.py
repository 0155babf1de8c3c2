import math

import numpy as np
import pytest

from wito.engine.domain import CorrelationModel, SelfSimilarParams
from wito.engine.spectral import (
    LimitMeasure,
    ResolutionError,
    SlowlyVarying,
    SpectralDensity,
    box_measure,
    check_integrability,
    check_triangle_identity,
    correlation_from_density,
    correlation_table,
    cos_triangle_integral,
    decay_exponent,
    density_from_model,
    fit_limit_measure,
    homogeneity_ratio,
    j_constant,
    j_kappa_k,
    karamata_ratio_test,
    model_correlation,
    regularizer,
    rescale,
    rescale_scaling_defect,
    riesz_constant,
    slowly_varying,
)


@pytest.mark.parametrize("kind", ["constant", "log", "iterated-log", "karamata"])
def test_slowly_varying_is_one_at_one(kind: str) -> None:
    assert slowly_varying(kind)(1.0) == pytest.approx(1.0)


def test_slowly_varying_values() -> None:
    assert slowly_varying("log")(math.e) == pytest.approx(2.0)
    assert slowly_varying("iterated-log")(math.e) == pytest.approx(1.0 + math.log(2.0))
    with pytest.raises(ValueError):
        SlowlyVarying(kind="bogus")


@pytest.mark.parametrize("kind", ["log", "iterated-log", "karamata"])
def test_ratio_test_shrinks(kind: str) -> None:
    report = karamata_ratio_test(slowly_varying(kind), (0.5, 2.0, 10.0), np.geomspace(1e2, 1e8, 7))
    assert report.decreasing
    assert report.deviations[-1] < report.deviations[0]


def test_ratio_test_rejects_bad_grid() -> None:
    with pytest.raises(ValueError):
        karamata_ratio_test(slowly_varying("log"), (2.0,), [10.0, 5.0])
    with pytest.raises(ValueError):
        karamata_ratio_test(slowly_varying("log"), (-1.0,), [10.0])


def test_regularizers() -> None:
    for kind in ("bump", "exp", "gauss"):
        assert regularizer(kind, 0.0) == pytest.approx(1.0)
    assert regularizer("bump", 0.4 * math.pi) == pytest.approx(1.0)
    assert regularizer("bump", math.pi) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        regularizer("box", 1.0)


def test_model_correlation_profiles() -> None:
    cauchy = CorrelationModel(nu=1, alpha=0.5)
    assert model_correlation(cauchy, [0])[0] == pytest.approx(1.0)
    assert model_correlation(cauchy, [3])[0] == pytest.approx(10.0 ** -0.25)
    pure = CorrelationModel(nu=1, alpha=0.5, profile="pure")
    assert model_correlation(pure, [4])[0] == pytest.approx(0.5)
    white = CorrelationModel.white(2)
    np.testing.assert_array_equal(model_correlation(white, [[0, 0], [1, 0]]), [1.0, 0.0])


def test_density_is_even_and_normalized() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.4), n=1024)
    assert G.total_mass == pytest.approx(1.0)
    assert G.evenness_defect() == 0.0
    G2 = density_from_model(CorrelationModel(nu=2, alpha=0.8), n=64)
    assert G2.total_mass == pytest.approx(1.0)
    assert G2.masses.shape == (64, 64)


def test_density_validation() -> None:
    with pytest.raises(ValueError):
        SpectralDensity(1, math.pi, 7, np.ones(7))
    with pytest.raises(ValueError):
        SpectralDensity(1, math.pi, 4, np.array([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        density_from_model(CorrelationModel(nu=1, alpha=0.4), n=64, normalization="unit")


def test_uneven_density_is_rejected() -> None:
    with pytest.raises(ValueError, match="mirror symmetric"):
        SpectralDensity(1, math.pi, 4, np.array([0.1, 0.2, 0.3, 0.4]))
    uneven = np.ones((4, 4))
    uneven[0, 1] = 2.0
    with pytest.raises(ValueError, match="mirror symmetric"):
        SpectralDensity(2, math.pi, 4, uneven)


def test_rounding_noise_is_symmetrized() -> None:
    masses = np.array([0.25, 0.25, 0.25, 0.25 * (1.0 + 1e-13)])
    G = SpectralDensity(1, math.pi, 4, masses)
    assert G.evenness_defect() == 0.0
    np.testing.assert_allclose(G.masses, np.flip(G.masses), rtol=0, atol=0)


def test_white_density_correlation() -> None:
    G = density_from_model(CorrelationModel.white(1), n=256)
    assert correlation_from_density(G, 0) == pytest.approx(1.0)
    assert correlation_from_density(G, 3) == pytest.approx(0.0, abs=1e-12)


def test_correlation_table_matches_direct_sum() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.6), n=256)
    table = correlation_table(G, 10)
    direct = [correlation_from_density(G, lag) for lag in range(-10, 11)]
    np.testing.assert_allclose(table, direct, atol=1e-12)
    G2 = density_from_model(CorrelationModel(nu=2, alpha=0.8), n=32)
    table2 = correlation_table(G2, 3)
    assert table2[3, 3] == pytest.approx(1.0)
    assert table2[5, 4] == pytest.approx(correlation_from_density(G2, (2, 1)), abs=1e-12)


def test_resolution_error_beyond_resolved_lags() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.6), n=64)
    assert G.max_lag == 16
    with pytest.raises(ResolutionError):
        correlation_from_density(G, 17)
    with pytest.raises(ResolutionError):
        correlation_table(G, 40)


def test_tail_normalization_gives_power_decay() -> None:
    model = CorrelationModel(nu=1, alpha=0.5)
    G = density_from_model(model, n=1 << 14, normalization="tail")
    for lag in (100, 400):
        assert correlation_from_density(G, lag) * lag ** 0.5 == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_log_log_slope_of_correlation(alpha: float) -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=alpha), n=1 << 14, normalization="tail")
    assert decay_exponent(G, range(32, 257)) == pytest.approx(-alpha, abs=0.05)


def test_decay_exponent_validation() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.5), n=256)
    with pytest.raises(ValueError):
        decay_exponent(G, [8])
    with pytest.raises(ResolutionError):
        decay_exponent(G, [8, 128])


@pytest.mark.parametrize("kind", ["log", "constant"])
def test_rescale_scaling_identity(kind: str) -> None:
    # G_{uN}(uA) = u^alpha L(N) / L(uN) G_N(A)
    model = CorrelationModel(nu=1, alpha=0.4, slowly_varying=kind)
    G = density_from_model(model, n=1 << 12)
    assert rescale_scaling_defect(G, model, N=16.0, u=2.0, lo=0.5, hi=1.0) < 1e-10
    assert rescale_scaling_defect(G, model, N=16.0, u=2.0, lo=-3.0, hi=0.25) < 1e-10


def test_rescale_scaling_identity_sees_a_wrong_norming() -> None:
    model = CorrelationModel(nu=1, alpha=0.4, slowly_varying="log")
    G = density_from_model(model, n=1 << 12)
    N, u = 16.0, 2.0
    L = slowly_varying("log")
    lhs = box_measure(rescale(G, u * N, model), u * 0.5, u * 1.0)
    # dropping L(N)/L(uN) leaves a visible defect
    wrong = u ** model.alpha * box_measure(rescale(G, N, model), 0.5, 1.0)
    assert abs(lhs / wrong - L(N) / L(u * N)) < 1e-10
    assert abs(lhs / wrong - 1.0) > 0.1
    with pytest.raises(ValueError):
        rescale_scaling_defect(G, model, N=N, u=0.0, lo=0.5, hi=1.0)


def test_box_measure_and_rescale() -> None:
    model = CorrelationModel(nu=1, alpha=0.5)
    G = density_from_model(model, n=512)
    assert box_measure(G, -math.pi, math.pi) == pytest.approx(1.0)
    assert box_measure(G, 0.0, math.pi) == pytest.approx(0.5)
    G_N = rescale(G, 16.0, model)
    assert G_N.extent == pytest.approx(16.0 * math.pi)
    assert G_N.total_mass == pytest.approx(4.0)
    with pytest.raises(ValueError):
        rescale(G, 0.5, model)
    with pytest.raises(ValueError):
        box_measure(G, 1.0, 0.0)


@pytest.mark.parametrize("alpha", [0.3, 0.6])
def test_rescaled_measure_is_homogeneous(alpha: float) -> None:
    model = CorrelationModel(nu=1, alpha=alpha)
    G = density_from_model(model, n=1 << 14, normalization="tail")
    G_N = rescale(G, 50.0, model)
    assert homogeneity_ratio(G_N, 0.5, 1.0, 2.0) == pytest.approx(2.0 ** alpha, rel=0.02)
    fitted = fit_limit_measure(G_N, model)
    assert fitted.constant == pytest.approx(1.0 / riesz_constant(1, alpha), rel=0.01)


def test_limit_measure_closed_form() -> None:
    model = CorrelationModel(nu=1, alpha=0.5)
    limit = LimitMeasure(model, 2.0)
    assert limit.measure(1.0, 4.0) == pytest.approx(2.0 * (2.0 - 1.0) / 0.5)
    assert limit.measure(-1.0, 1.0) == pytest.approx(2.0 * 2.0 / 0.5)
    assert limit.density(4.0) == pytest.approx(2.0 * 0.5)
    with pytest.raises(ValueError):
        LimitMeasure(CorrelationModel(nu=2, alpha=1.0), 1.0).measure((-1.0, -1.0), (1.0, 1.0))


@pytest.mark.parametrize("t", [0.0, 0.5, 2.0])
def test_triangle_identity_one_dimension(t: float) -> None:
    model = CorrelationModel(nu=1, alpha=0.5)
    res = check_triangle_identity(LimitMeasure(model, 1.0 / riesz_constant(1, 0.5)), t)
    assert res.diff / abs(res.rhs) < 5e-3


def test_triangle_identity_validation() -> None:
    axis = CorrelationModel(nu=2, alpha=1.0, angular="axis", angular_amplitude=0.3)
    with pytest.raises(ValueError):
        check_triangle_identity(LimitMeasure(axis, 1.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        check_triangle_identity(LimitMeasure(CorrelationModel(nu=1, alpha=0.5), 1.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        cos_triangle_integral(-0.5, 1.0)


def test_j_constant_numeric_matches_closed_form() -> None:
    params = SelfSimilarParams(kappa=0.1, k=3, nu=1)
    assert j_constant(params) == pytest.approx(j_constant(params, numeric=False), rel=1e-4)
    assert j_constant(SelfSimilarParams(kappa=0.3, k=2)) == math.inf


def test_j_kappa_k_scaling() -> None:
    one = SelfSimilarParams(kappa=0.2, k=1)
    assert j_kappa_k(one, 2.0) == pytest.approx(2.0 ** (0.4 - 1.0))
    two = SelfSimilarParams(kappa=0.2, k=2)
    assert j_kappa_k(two, 3.0) / j_kappa_k(two, 1.0) == pytest.approx(3.0 ** two.exponent)
    with pytest.raises(ValueError):
        j_kappa_k(two, 0.0)


@pytest.mark.parametrize("kappa, k, finite", [(0.15, 2, True), (0.3, 2, False), (0.1, 3, True), (0.2, 3, False)])
def test_integrability_verdicts(kappa: float, k: int, finite: bool) -> None:
    params = SelfSimilarParams(kappa=kappa, k=k)
    assert params.convergent is finite
    report = check_integrability(params)
    assert report.finite is finite
    assert math.isfinite(report.value) is finite


def test_integrability_of_nonpositive_kappa() -> None:
    assert not check_integrability(SelfSimilarParams(kappa=-0.1, k=2)).finite
