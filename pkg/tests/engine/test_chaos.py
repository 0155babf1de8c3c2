"""Regular systems, realizations and discrete Wiener–Itô integrals."""

import math

import numpy as np
import pytest

from wito.engine.chaos import (
    KernelSymmetryError,
    RegularSystem,
    SpectralRealization,
    aggregate_realization,
    build_regular_system,
    change_of_variables,
    inner_product,
    integrate,
    integrate_many,
    ito_compare,
    ito_refinement_study,
    kernel_second_moment,
    lift_kernel,
    phase_kernel,
    product_moment_check,
    random_symmetric_kernel,
    realization_covariance,
    refinement_map,
    sample_batch,
    sample_realization,
    shift_kernel,
    uniform_system,
)
from wito.engine.diagrams import GridKernel, SystemMismatchError
from wito.engine.domain import CorrelationModel
from wito.engine.replicates import replicate_rng
from wito.engine.spectral import ResolutionError, correlation_from_density, density_from_model


def test_uniform_system_layout() -> None:
    system = uniform_system(2, 4)
    assert system.size == 16
    assert system.pairs == 8
    np.testing.assert_array_equal(system.centers[system.pairs:], -system.centers[:system.pairs])
    assert system.total_mass == pytest.approx(1.0)
    assert np.all(system.centers[: system.pairs, 0] > 0)


def test_build_regular_system_from_model_density() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.4), n=1024)
    system = build_regular_system(G, 16)
    assert system.size == 16
    assert system.total_mass == pytest.approx(G.total_mass)
    with pytest.raises(ResolutionError):
        build_regular_system(G, 7)
    with pytest.raises(ResolutionError):
        build_regular_system(G, 12)


def test_from_masses_places_the_masses() -> None:
    system = RegularSystem.from_masses([0.1, 0.2, 0.3])
    assert system.size == 6
    np.testing.assert_allclose(np.sort(system.masses[:3]), [0.1, 0.2, 0.3])
    np.testing.assert_allclose(system.masses[3:], system.masses[:3])


def test_realization_is_hermitian() -> None:
    system = uniform_system(1, 8)
    z = sample_realization(system, seed=3, replicate=5)
    half = system.pairs
    np.testing.assert_array_equal(z.values[half:], np.conj(z.values[:half]))
    with pytest.raises(ValueError):
        SpectralRealization(system, np.ones(system.size) * (1 + 1j))
    frame = z.to_frame()
    assert list(frame.columns) == ["center_1", "mass", "re", "im"]


def test_sample_batch_matches_single_draws() -> None:
    system = uniform_system(1, 8)
    batch = sample_batch(system, 2, 3, 7)
    for row, r in enumerate(range(3, 7)):
        np.testing.assert_array_equal(batch[row], sample_realization(system, 2, r).values)


def test_realization_variance_matches_masses() -> None:
    system = uniform_system(1, 4, total_mass=2.0)
    Z = sample_batch(system, 0, 0, 20_000)
    var = np.mean(np.abs(Z) ** 2, axis=0)
    np.testing.assert_allclose(var, system.masses, rtol=0.05)


def test_refinement_aggregation_conserves_mass() -> None:
    fine = uniform_system(1, 16)
    coarse = uniform_system(1, 4)
    mapping = refinement_map(fine, coarse)
    assert mapping.shape == (fine.size,)
    np.testing.assert_allclose(np.bincount(mapping, weights=fine.masses), coarse.masses)
    Z = sample_batch(fine, 1, 0, 3)
    agg = aggregate_realization(Z, mapping, coarse.size)
    half = coarse.pairs
    np.testing.assert_allclose(agg[:, half:], np.conj(agg[:, :half]))
    with pytest.raises(SystemMismatchError):
        refinement_map(uniform_system(1, 6), coarse)


def test_lifted_kernel_gives_the_same_integral() -> None:
    fine = uniform_system(1, 8)
    coarse = uniform_system(1, 4)
    f = random_symmetric_kernel(coarse, 1, replicate_rng(0, "test-lift", 0))
    Z = sample_batch(fine, 4, 0, 5)
    Zc = aggregate_realization(Z, refinement_map(fine, coarse), coarse.size)
    np.testing.assert_allclose(integrate_many(lift_kernel(f, fine), Z), integrate_many(f, Zc))


def test_integrals_are_real_for_hermitian_kernels() -> None:
    system = uniform_system(1, 8)
    f = random_symmetric_kernel(system, 3, replicate_rng(1, "test-real", 0))
    assert f.hermitian_defect() < 1e-12
    z = sample_realization(system, 9)
    value = integrate(f, z)
    assert math.isfinite(value)


def test_non_hermitian_kernel_is_rejected() -> None:
    system = uniform_system(1, 4)
    f = GridKernel(system, np.array([1j, 0.0, 0.0, 0.0]))
    Z = sample_batch(system, 0, 0, 2)
    with pytest.raises(KernelSymmetryError):
        integrate_many(f, Z)


def test_isometry_and_orthogonality_by_monte_carlo() -> None:
    system = uniform_system(1, 6)
    f2 = random_symmetric_kernel(system, 2, replicate_rng(5, "test-mc", 2))
    f1 = random_symmetric_kernel(system, 1, replicate_rng(5, "test-mc", 1))
    Z = sample_batch(system, 5, 0, 20_000)
    x2 = integrate_many(f2, Z)
    x1 = integrate_many(f1, Z)
    sq = x2 ** 2
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(sq.mean() - kernel_second_moment(f2)) <= 4.0 * se
    prod = x1 * x2
    assert abs(prod.mean()) <= 4.0 * prod.std(ddof=1) / math.sqrt(prod.size)


def test_system_density_reproduces_the_phase_covariance() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.4), n=1024)
    system = build_regular_system(G, 16)
    density = system.to_density()
    assert density.n == 16 and density.max_lag == 4
    assert density.total_mass == pytest.approx(system.total_mass)
    for lag in range(5):
        expected = float(np.sum(np.cos(lag * system.centers[:, 0]) * system.masses))
        assert correlation_from_density(density, lag) == pytest.approx(expected, abs=1e-12)


def test_realization_covariance_matches_the_density() -> None:
    G = density_from_model(CorrelationModel(nu=1, alpha=0.4), n=1024)
    system = build_regular_system(G, 16)
    Z = sample_batch(system, 9, 0, 20_000)
    comparisons = realization_covariance(system, Z, [0, 1, 2, 4])
    assert [c.label for c in comparisons] == ["n=(0,)", "n=(1,)", "n=(2,)", "n=(4,)"]
    assert comparisons[0].expected == pytest.approx(system.total_mass)
    for cmp in comparisons:
        assert cmp.passed(4.0), f"{cmp.label}: {cmp.mc:.5f} vs {cmp.expected:.5f} (se {cmp.se:.4f})"
    with pytest.raises(ResolutionError):
        realization_covariance(system, Z[:10], [5])


def test_realization_covariance_two_dimensions() -> None:
    system = build_regular_system(density_from_model(CorrelationModel(nu=2, alpha=0.8), n=64), 8)
    Z = sample_batch(system, 4, 0, 20_000)
    for cmp in realization_covariance(system, Z, [(0, 0), (1, 0), (2, 1)]):
        assert cmp.passed(4.0), cmp


@pytest.mark.parametrize("arities", [(1, 1, 2), (2, 2, 2), (1, 2, 3), (1, 1, 1, 1)])
def test_product_moments_match_the_diagram_formula(arities) -> None:
    system = uniform_system(1, 6)
    rng = replicate_rng(12, "test-product", len(arities))
    kernels = [random_symmetric_kernel(system, n, rng) for n in arities]
    Z = sample_batch(system, 12, 0, 20_000)
    cmp = product_moment_check(kernels, Z)
    assert cmp.label == "order=" + ",".join(str(n) for n in arities)
    assert cmp.replicates == 20_000
    assert cmp.passed(4.0), f"{cmp.mc:.5f} vs {cmp.expected:.5f} (se {cmp.se:.4f})"


def test_product_moment_check_sees_a_wrong_scale() -> None:
    system = uniform_system(1, 6)
    f1 = random_symmetric_kernel(system, 1, replicate_rng(2, "test-scale", 1))
    Z = sample_batch(system, 2, 0, 20_000)
    good = product_moment_check([f1, f1], Z)
    bad = product_moment_check([f1, f1], 2.0 * Z)
    assert good.passed(4.0)
    assert bad.mc == pytest.approx(4.0 * good.mc)
    assert not bad.passed(4.0)
    with pytest.raises(ValueError):
        product_moment_check([], Z)


def test_inner_product_of_phase_kernels() -> None:
    system = uniform_system(1, 8)
    phi = phase_kernel(system, (1.0,))
    assert inner_product(phi, phi).real == pytest.approx(1.0)


def test_ito_formula_for_disjoint_unit_vectors() -> None:
    system = uniform_system(1, 8)
    half = system.pairs
    phis = []
    for c in (0, 1):
        v = np.zeros(system.size, dtype=complex)
        v[[c, c + half]] = 1.0 / math.sqrt(2.0 * system.masses[c])
        phis.append(GridKernel(system, v))
    cmp = ito_compare(phis, [1, 1], sample_batch(system, 0, 0, 50))
    assert float(cmp.diff.max()) < 1e-9 * (1.0 + float(np.abs(cmp.lhs).max()))


def test_ito_compare_requires_orthonormal_kernels() -> None:
    system = uniform_system(1, 8)
    phi = phase_kernel(system, (1.0,))
    with pytest.raises(ValueError):
        ito_compare([phi * 2.0], [2], sample_batch(system, 0, 0, 2))


def test_ito_refinement_error_decreases() -> None:
    study = ito_refinement_study(2, (4, 8, 16, 32), seed=1, replicates=100, nu=1)
    errors = study.rms_relative_error
    assert study.resolutions == (4, 8, 16, 32)
    assert errors[-1] < 0.6 * errors[0]


def test_shift_acts_as_a_phase_on_the_measure() -> None:
    system = uniform_system(1, 8)
    f = random_symmetric_kernel(system, 2, replicate_rng(2, "test-shift", 0))
    t = (2.5,)
    Z = sample_batch(system, 0, 0, 10)
    phase = phase_kernel(system, t).values
    np.testing.assert_allclose(
        integrate_many(shift_kernel(f, t), Z), integrate_many(f, Z * phase[None, :]), atol=1e-12
    )
    assert kernel_second_moment(shift_kernel(f, t)) == pytest.approx(kernel_second_moment(f))


def test_change_of_variables_preserves_integrals() -> None:
    system = uniform_system(1, 8)
    f = random_symmetric_kernel(system, 2, replicate_rng(4, "test-cov", 0))

    def g(c):
        return (1.0 + 0.5 * np.cos(c[:, 0])) * np.exp(1j * c[:, 0])

    moved, new_system = change_of_variables(f, g)
    gv = g(system.centers)
    np.testing.assert_allclose(new_system.masses * np.abs(gv) ** 2, system.masses)
    Z = sample_batch(system, 3, 0, 10)
    np.testing.assert_allclose(integrate_many(moved, Z / gv[None, :]), integrate_many(f, Z), atol=1e-12)
    assert kernel_second_moment(moved) == pytest.approx(kernel_second_moment(f))


def test_change_of_variables_rejects_bad_multipliers() -> None:
    system = uniform_system(1, 4)
    f = random_symmetric_kernel(system, 1, replicate_rng(0, "test-bad", 0))
    with pytest.raises(ValueError):
        change_of_variables(f, np.array([1j, 1.0, 1j, 1.0]))
    with pytest.raises(ValueError):
        change_of_variables(f, np.array([0.0, 1.0, 0.0, 1.0]))
