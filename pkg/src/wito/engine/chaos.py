"""
chaos.py — Desk-scale Wiener–Itô integrals
------------------------------------------
Responsibility:
- Build regular systems (mirror-paired frequency cells with their masses)
  from spectral densities, refine them and map fine cells onto coarse ones.
- Draw realizations of the random spectral measure over a regular system.
- Integrate simple kernels: n! I_G(f) = sum over admissible tuples of
  f(j_1, ..., j_n) Z_{j_1} ... Z_{j_n}.
- Numerical checks of Itô's formula, the shift action and the change of
  variables formula.

Design notes:
- Positions 0..M-1 are the cells whose first centre coordinate is positive,
  in row-major grid order; position p + M is the mirror of position p.
- Mirror centres are stored as exact negations, so phases e^{i(t,x)} taken
  at cell centres are Hermitian without rounding.
- Realizations of replicate r come from the Philox stream keyed by
  (seed, "spectral-realization", r); cell order inside a draw is fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from wito.engine.diagrams import (
    GridKernel,
    SystemMismatchError,
    admissible_mask,
    product_expectation,
    same_system,
    symmetrize,
)
from wito.engine.hermite import eval_hermite
from wito.engine.replicates import replicate_rng
from wito.engine.spectral import ResolutionError, SpectralDensity, correlation_from_density

LOGGER = logging.getLogger(__name__)

IMAGINARY_TOLERANCE = 1e-9
ORTHONORMAL_TOLERANCE = 1e-6
REALIZATION_STREAM = "spectral-realization"


# ---- Exceptions ----


class KernelSymmetryError(ValueError):
    """An integral kept an imaginary part above tolerance (kernel not Hermitian)."""


# ---- Regular systems ----


@dataclass(frozen=True, eq=False)
class RegularSystem:
    """
    Mirror-paired cells Delta_p, p = 0..2M-1, with Delta_{p+M} = -Delta_p.

    - resolution: cells per axis of the underlying grid (even)
    - masses: G(Delta_p), shape (2M,)
    - centers, lo, hi: shape (2M, nu)
    - grid_index: integer grid coordinates of every position, shape (2M, nu)
    """
    nu: int
    resolution: int
    extent: float
    masses: np.ndarray
    centers: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    grid_index: np.ndarray

    def __post_init__(self) -> None:
        size = self.masses.shape[0]
        if size % 2 or size == 0:
            raise ValueError(f"RegularSystem needs an even, nonzero number of positions (got {size})")
        half = size // 2
        if not np.array_equal(self.centers[half:], -self.centers[:half]):
            raise ValueError("RegularSystem: mirror centres must be exact negations")
        if not np.allclose(self.masses[half:], self.masses[:half], rtol=1e-12, atol=0.0):
            raise ValueError("RegularSystem: mirror cells must carry equal masses")
        for arr in (self.masses, self.centers, self.lo, self.hi, self.grid_index):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.masses.shape[0])

    @property
    def pairs(self) -> int:
        return self.size // 2

    @property
    def neg(self) -> np.ndarray:
        return (np.arange(self.size) + self.pairs) % self.size

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def position_table(self) -> np.ndarray:
        """Grid coordinates -> position (shape (resolution,)*nu)."""
        table = np.full((self.resolution,) * self.nu, -1, dtype=np.int64)
        table[tuple(self.grid_index.T)] = np.arange(self.size)
        return table

    def with_masses(self, masses: np.ndarray) -> "RegularSystem":
        masses = np.asarray(masses, dtype=float)
        if masses.shape != self.masses.shape:
            raise SystemMismatchError(f"masses of shape {masses.shape} do not fit {self.size} positions")
        return RegularSystem(
            self.nu, self.resolution, self.extent, masses.copy(),
            self.centers.copy(), self.lo.copy(), self.hi.copy(), self.grid_index.copy(),
        )

    def to_density(self) -> SpectralDensity:
        """The system's cell masses as a density on its own resolution^nu grid."""
        grid = np.zeros((self.resolution,) * self.nu)
        grid[tuple(self.grid_index.T)] = self.masses
        return SpectralDensity(self.nu, self.extent, self.resolution, grid, label=f"system@{self.resolution}")

    def describe(self) -> dict:
        return {
            "nu": self.nu,
            "resolution": self.resolution,
            "extent": self.extent,
            "pairs": self.pairs,
            "total_mass": self.total_mass,
        }

    @classmethod
    def from_masses(cls, positive_masses: Sequence[float], extent: float = math.pi) -> "RegularSystem":
        """One-dimensional system with 2M cells over [-extent, extent); masses of the M positive cells."""
        m = np.asarray(positive_masses, dtype=float)
        if m.ndim != 1 or m.size == 0 or np.any(m < 0):
            raise ValueError("positive_masses must be a non-empty sequence of nonnegative numbers")
        R = 2 * m.size
        grid = np.zeros((R,) * 1)
        grid[m.size:] = m
        grid[:m.size] = m[::-1]
        return build_regular_system(SpectralDensity(1, extent, R, grid), R)


def build_regular_system(G: SpectralDensity, resolution: int) -> RegularSystem:
    """Aggregate the grid of G into resolution^nu mirror-paired cells."""
    if resolution < 2 or resolution % 2:
        raise ResolutionError(f"resolution must be even and >= 2 (got {resolution})")
    if G.n % resolution:
        raise ResolutionError(f"resolution {resolution} does not divide the density grid of {G.n} cells")
    if G.total_mass <= 0.0:
        raise ValueError("the spectral density has zero total mass")
    factor = G.n // resolution
    nu = G.nu
    shape = []
    for _ in range(nu):
        shape += [resolution, factor]
    coarse = G.masses.reshape(shape).sum(axis=tuple(range(1, 2 * nu, 2)))

    width = 2.0 * G.extent / resolution
    axis_centers = -G.extent + (np.arange(resolution) + 0.5) * width
    idx = np.stack(np.meshgrid(*([np.arange(resolution)] * nu), indexing="ij"), axis=-1).reshape(-1, nu)
    positive = idx[axis_centers[idx[:, 0]] > 0.0]
    mirror = resolution - 1 - positive
    grid_index = np.concatenate([positive, mirror], axis=0)
    centers_pos = axis_centers[positive]
    centers = np.concatenate([centers_pos, -centers_pos], axis=0)
    lo = -G.extent + grid_index * width
    hi = lo + width
    masses = coarse[tuple(grid_index.T)]
    half = positive.shape[0]
    masses[half:] = masses[:half]
    LOGGER.debug("build_regular_system: nu=%d resolution=%d pairs=%d", nu, resolution, half)
    return RegularSystem(nu, resolution, float(G.extent), masses, centers, lo, hi, grid_index)


def uniform_system(nu: int, resolution: int, total_mass: float = 1.0) -> RegularSystem:
    """Uniform measure of the given total mass on [-pi, pi)^nu."""
    masses = np.full((resolution,) * nu, total_mass / resolution ** nu)
    return build_regular_system(SpectralDensity(nu, math.pi, resolution, masses), resolution)


def refinement_map(fine: RegularSystem, coarse: RegularSystem) -> np.ndarray:
    """Coarse position containing each fine position."""
    if fine.nu != coarse.nu or fine.extent != coarse.extent:
        raise SystemMismatchError("systems live on different grids")
    if fine.resolution % coarse.resolution:
        raise SystemMismatchError(
            f"resolution {fine.resolution} is not a refinement of resolution {coarse.resolution}"
        )
    ratio = fine.resolution // coarse.resolution
    table = coarse.position_table()
    return table[tuple((fine.grid_index // ratio).T)]


def aggregate_realization(values: np.ndarray, mapping: np.ndarray, coarse_size: int) -> np.ndarray:
    """Z(coarse cell) = sum of Z over the fine cells it contains; values has shape (..., fine)."""
    values = np.asarray(values)
    out = np.zeros(values.shape[:-1] + (coarse_size,), dtype=complex)
    np.add.at(np.moveaxis(out, -1, 0), mapping, np.moveaxis(values, -1, 0))
    return out


def lift_kernel(kernel: GridKernel, fine: RegularSystem) -> GridKernel:
    """The coarse simple function seen as a function adapted to a refinement."""
    mapping = refinement_map(fine, kernel.system)
    values = kernel.masked()
    for axis in range(kernel.arity):
        values = np.take(values, mapping, axis=axis)
    return GridKernel(fine, values)


# ---- Realizations ----


@dataclass(frozen=True, eq=False)
class SpectralRealization:
    """One draw Z_p of the random spectral measure; Z_{p+M} = conj(Z_p)."""
    system: RegularSystem
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.system.size,):
            raise SystemMismatchError(f"realization of shape {values.shape} does not fit {self.system.size} positions")
        half = self.system.pairs
        if not np.array_equal(values[half:], np.conj(values[:half])):
            raise ValueError("SpectralRealization must satisfy Z(-Delta) = conj Z(Delta)")
        object.__setattr__(self, "values", values)

    def to_frame(self) -> pd.DataFrame:
        data = {f"center_{i + 1}": self.system.centers[:, i] for i in range(self.system.nu)}
        data.update({"mass": self.system.masses, "re": self.values.real, "im": self.values.imag})
        return pd.DataFrame(data)


def _draw(system: RegularSystem, seed: int, replicate: int) -> np.ndarray:
    rng = replicate_rng(seed, REALIZATION_STREAM, replicate)
    half = system.pairs
    scale = np.sqrt(0.5 * system.masses[:half])
    re = rng.standard_normal(half) * scale
    im = rng.standard_normal(half) * scale
    z = re + 1j * im
    return np.concatenate([z, np.conj(z)])


def sample_realization(system: RegularSystem, seed: int, replicate: int = 0) -> SpectralRealization:
    """Re Z_p, Im Z_p independent N(0, G(Delta_p)/2) for p < M; mirrors conjugated."""
    return SpectralRealization(system, _draw(system, seed, replicate))


def sample_batch(system: RegularSystem, seed: int, start: int, stop: int) -> np.ndarray:
    """Realizations of replicates start..stop-1 stacked as rows."""
    if stop < start:
        raise ValueError(f"empty replicate range [{start}, {stop})")
    out = np.empty((stop - start, system.size), dtype=complex)
    for row, replicate in enumerate(range(start, stop)):
        out[row] = _draw(system, seed, replicate)
    return out


# ---- Integration ----


def _values_of(realization) -> Tuple[np.ndarray, Optional[RegularSystem]]:
    if isinstance(realization, SpectralRealization):
        return realization.values, realization.system
    return np.asarray(realization, dtype=complex), None


def _real_part(values: np.ndarray) -> np.ndarray:
    bad = np.abs(values.imag) > IMAGINARY_TOLERANCE * (1.0 + np.abs(values))
    if np.any(bad):
        worst = float(np.max(np.abs(values.imag)))
        raise KernelSymmetryError(
            f"integral keeps an imaginary part of {worst:.3e}; the kernel is not Hermitian symmetric"
        )
    return values.real


def integrate_many(kernel: GridKernel, Z: np.ndarray) -> np.ndarray:
    """n! I_G(f) for a batch of realizations Z of shape (B, 2M)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if Z.shape[1] != kernel.system.size:
        raise SystemMismatchError(f"realizations with {Z.shape[1]} positions do not fit the kernel's system")
    if kernel.arity == 0:
        return np.full(Z.shape[0], _real_part(np.asarray([kernel.scalar]))[0])
    result = np.tensordot(Z, kernel.masked(), axes=([1], [0]))
    for _ in range(kernel.arity - 1):
        result = np.einsum("bi,bi...->b...", Z, result)
    return _real_part(result)


def integrate(kernel: GridKernel, realization) -> float:
    """n! I_G(f) = sum over admissible tuples of f(j) Z_{j_1} ... Z_{j_n} for one realization."""
    values, system = _values_of(realization)
    if system is not None and not same_system(system, kernel.system):
        raise SystemMismatchError("kernel and realization are adapted to different regular systems")
    return float(integrate_many(kernel, values[None, :])[0])


def _set_partitions(n: int) -> List[List[List[int]]]:
    if n == 0:
        return [[]]
    out = []
    for part in _set_partitions(n - 1):
        for i in range(len(part)):
            out.append(part[:i] + [part[i] + [n - 1]] + part[i + 1:])
        out.append(part + [[n - 1]])
    return out


def integrate_product(kernels: Sequence[GridKernel], Z: np.ndarray) -> np.ndarray:
    """
    Integral of the tensor product of arity-1 kernels (diagonals excluded) for a
    batch of realizations, by inclusion–exclusion over set partitions of the factors.
    """
    if not kernels:
        raise ValueError("integrate_product needs at least one kernel")
    system = kernels[0].system
    for k in kernels:
        if k.arity != 1:
            raise ValueError("integrate_product takes arity-1 kernels only")
        if not same_system(system, k.system):
            raise SystemMismatchError("kernels are adapted to different regular systems")
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    half = system.pairs
    # A_l(c) = g_l(c) Z_c + g_l(-c) Z_{-c} for every pair class c
    classes = [k.values[None, :half] * Z[:, :half] + k.values[None, half:] * Z[:, half:] for k in kernels]
    total = np.zeros(Z.shape[0], dtype=complex)
    for partition in _set_partitions(len(kernels)):
        term = np.ones(Z.shape[0], dtype=complex)
        weight = 1
        for block in partition:
            prod = np.ones_like(classes[0])
            for l in block:
                prod = prod * classes[l]
            term = term * prod.sum(axis=1)
            weight *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
        total += weight * term
    return _real_part(total)


def inner_product(f: GridKernel, g: GridKernel) -> complex:
    """<f, g>_G = sum f conj(g) prod G over admissible tuples."""
    if not same_system(f.system, g.system) or f.arity != g.arity:
        raise SystemMismatchError("inner product of kernels on different systems or arities")
    return complex(np.sum(f.masked() * np.conj(g.masked()) * f.measure()))


@dataclass(frozen=True)
class ItoComparison:
    lhs: np.ndarray
    rhs: np.ndarray
    diff: np.ndarray


def ito_compare(phis: Sequence[GridKernel], powers: Sequence[int], realization) -> ItoComparison:
    """
    prod_s H_{j_s}(int phi_s dZ) against the integral of phi_1^{(x) j_1} (x) ... (x) phi_m^{(x) j_m}
    on the same realization(s).
    """
    if len(phis) != len(powers) or not phis:
        raise ValueError("ito_compare needs one power per kernel")
    if any(j < 1 for j in powers):
        raise ValueError(f"powers must be >= 1 (got {tuple(powers)})")
    for s, f in enumerate(phis):
        for t, g in enumerate(phis):
            if abs(inner_product(f, g) - (1.0 if s == t else 0.0)) > ORTHONORMAL_TOLERANCE:
                raise ValueError(f"kernels {s} and {t} are not orthonormal in L2(G)")
    values, _ = _values_of(realization)
    Z = np.atleast_2d(values)
    lhs = np.ones(Z.shape[0])
    factors: List[GridKernel] = []
    for phi, j in zip(phis, powers):
        lhs = lhs * eval_hermite(j, integrate_many(phi, Z))
        factors.extend([phi] * j)
    rhs = integrate_product(factors, Z)
    return ItoComparison(lhs=lhs, rhs=rhs, diff=np.abs(lhs - rhs))


def phase_kernel(system: RegularSystem, t) -> GridKernel:
    """Arity-1 kernel e^{i(t, x)} at cell centres."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return GridKernel(system, np.exp(1j * (system.centers @ t)))


@dataclass(frozen=True)
class RefinementStudy:
    order: int
    resolutions: Tuple[int, ...]
    rms_relative_error: Tuple[float, ...]

    @property
    def monotone(self) -> bool:
        errs = self.rms_relative_error
        return all(b < a for a, b in zip(errs, errs[1:]))


def ito_refinement_study(
    order: int,
    resolutions: Sequence[int] = (8, 16, 32, 64),
    *,
    seed: int = 0,
    replicates: int = 200,
    nu: int = 2,
    t=(1.0, 0.0),
) -> RefinementStudy:
    """
    RMS over replicates of |H_n(I(phi)) - n-fold tensor integral| / sqrt(n!) at
    every resolution, for phi = e^{i(t,x)} under the uniform measure of mass 1.
    The finest system is sampled and aggregated onto the coarser ones.
    """
    resolutions = tuple(sorted(int(r) for r in resolutions))
    t = tuple(np.atleast_1d(t)[:nu])
    finest = uniform_system(nu, resolutions[-1])
    Z_fine = sample_batch(finest, seed, 0, replicates)
    errors = []
    for res in resolutions:
        system = uniform_system(nu, res)
        Z = aggregate_realization(Z_fine, refinement_map(finest, system), system.size)
        cmp = ito_compare([phase_kernel(system, t)], [order], Z)
        errors.append(float(np.sqrt(np.mean(cmp.diff ** 2)) / math.sqrt(math.factorial(order))))
        LOGGER.debug("ito_refinement_study: order=%d resolution=%d rms=%.4g", order, res, errors[-1])
    return RefinementStudy(order=order, resolutions=resolutions, rms_relative_error=tuple(errors))


# ---- Kernels ----


def cell_kernel(system: RegularSystem, fn: Callable[..., np.ndarray], arity: int = 1) -> GridKernel:
    """
    Kernel with values fn(x_1, ..., x_n) at cell centres; each x_l is passed with
    shape (1, .., 2M, .., 1, nu) so that fn broadcasts over the index tuple.
    """
    args = []
    for l in range(arity):
        shape = [1] * arity + [system.nu]
        shape[l] = system.size
        args.append(system.centers.reshape(shape))
    return GridKernel(system, np.asarray(fn(*args), dtype=complex))


def hermitian_part(values: np.ndarray, system: RegularSystem) -> np.ndarray:
    """(f + conj f(-.)) / 2."""
    neg = values
    for axis in range(values.ndim):
        neg = np.take(neg, system.neg, axis=axis)
    return 0.5 * (values + np.conj(neg))


def random_symmetric_kernel(system: RegularSystem, arity: int, rng: np.random.Generator) -> GridKernel:
    """Symmetric, Hermitian, diagonal-free kernel with complex Gaussian values."""
    shape = (system.size,) * arity
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kernel = symmetrize(GridKernel(system, raw))
    values = hermitian_part(kernel.values, system)
    if arity >= 2:
        values = np.where(admissible_mask(arity, system.size), values, 0.0)
    return GridKernel(system, values)


def kernel_second_moment(kernel: GridKernel) -> float:
    """E(n! I_G(f))^2 = n! ||Sym f||^2."""
    return math.factorial(kernel.arity) * symmetrize(kernel).norm() ** 2


# ---- Monte Carlo comparisons ----


@dataclass(frozen=True)
class MonteCarloComparison:
    """Sample mean of a product of integrals against its exact expectation."""
    label: str
    mc: float
    se: float
    expected: float
    replicates: int

    @property
    def z(self) -> float:
        err = abs(self.mc - self.expected)
        if self.se > 0.0:
            return err / self.se
        return 0.0 if err == 0.0 else math.inf

    def passed(self, threshold: float = 4.0) -> bool:
        return self.z <= threshold

    @classmethod
    def from_samples(cls, label: str, samples, expected: float) -> "MonteCarloComparison":
        """Mean and standard error of independent per-replicate samples."""
        samples = np.asarray(samples, dtype=float).ravel()
        n = samples.size
        if n < 2:
            raise ValueError("a Monte Carlo comparison needs at least 2 replicates")
        return cls(
            label=label,
            mc=float(samples.mean()),
            se=float(samples.std(ddof=1) / math.sqrt(n)),
            expected=float(expected),
            replicates=n,
        )


def realization_covariance(system: RegularSystem, Z: np.ndarray, lags) -> List[MonteCarloComparison]:
    """
    E X_0 X_n for X_n = I_G(e^{i(n, .)}) against r(n) of the system's own density.

    Lags must lie in the range resolved by that density (resolution/4 per axis).
    """
    density = system.to_density()
    x0 = integrate_many(phase_kernel(system, np.zeros(system.nu)), Z)
    out = []
    for lag in lags:
        lag = np.atleast_1d(np.asarray(lag, dtype=float))
        expected = correlation_from_density(density, lag)
        xn = integrate_many(phase_kernel(system, lag), Z)
        out.append(MonteCarloComparison.from_samples(f"n={tuple(int(v) for v in lag)}", x0 * xn, expected))
    return out


def product_moment_check(kernels: Sequence[GridKernel], Z: np.ndarray) -> MonteCarloComparison:
    """Sample mean of prod_i n_i! I_G(f_i) against the diagram formula."""
    if not kernels:
        raise ValueError("at least one kernel is required")
    prod = np.ones(np.atleast_2d(Z).shape[0])
    for kernel in kernels:
        prod = prod * integrate_many(kernel, Z)
    label = "order=" + ",".join(str(k.arity) for k in kernels)
    return MonteCarloComparison.from_samples(label, prod, product_expectation(kernels))


def shift_kernel(kernel: GridKernel, t) -> GridKernel:
    """f(x_1..x_n) e^{i(t, x_1 + ... + x_n)} at cell centres."""
    phases = phase_kernel(kernel.system, t).values
    factor = np.ones(())
    for _ in range(kernel.arity):
        factor = np.multiply.outer(factor, phases)
    return kernel.with_values(kernel.values * factor)


def change_of_variables(
    kernel: GridKernel,
    g,
    target_masses: Optional[np.ndarray] = None,
    tolerance: float = 1e-9,
) -> Tuple[GridKernel, RegularSystem]:
    """
    f'(x) = f(x) prod g(x_l) on the system carrying G' with |g|^2 G' = G.

    g is an array over positions or a callable of the centres; g(-x) must equal
    conj g(x).  Without target_masses, G' = G / |g|^2.
    """
    system = kernel.system
    values = np.asarray(g(system.centers) if callable(g) else g, dtype=complex)
    if values.shape != (system.size,):
        raise SystemMismatchError(f"multiplier of shape {values.shape} does not fit {system.size} positions")
    if np.max(np.abs(values[system.neg] - np.conj(values))) > tolerance * (1.0 + np.max(np.abs(values))):
        raise ValueError("the multiplier must satisfy g(-x) = conj g(x)")
    weight = np.abs(values) ** 2
    if np.any(weight == 0.0):
        raise ValueError("the multiplier must not vanish on a cell")
    if target_masses is None:
        target = system.masses / weight
    else:
        target = np.asarray(target_masses, dtype=float)
        mismatch = np.abs(weight * target - system.masses)
        if np.max(mismatch) > tolerance * (1.0 + np.max(system.masses)):
            raise ValueError(f"|g|^2 G' differs from G by {np.max(mismatch):.3e} on some cell")
    new_system = system.with_masses(target)
    factor = np.ones(())
    for _ in range(kernel.arity):
        factor = np.multiply.outer(factor, values)
    return GridKernel(new_system, kernel.values * factor), new_system


__all__ = [
    "ItoComparison",
    "KernelSymmetryError",
    "MonteCarloComparison",
    "RefinementStudy",
    "RegularSystem",
    "SpectralRealization",
    "aggregate_realization",
    "build_regular_system",
    "cell_kernel",
    "change_of_variables",
    "hermitian_part",
    "inner_product",
    "integrate",
    "integrate_many",
    "integrate_product",
    "ito_compare",
    "ito_refinement_study",
    "kernel_second_moment",
    "lift_kernel",
    "phase_kernel",
    "product_moment_check",
    "random_symmetric_kernel",
    "realization_covariance",
    "refinement_map",
    "sample_batch",
    "sample_realization",
    "shift_kernel",
    "uniform_system",
]
