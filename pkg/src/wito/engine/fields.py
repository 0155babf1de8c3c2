"""
fields.py — Long-range-dependent Gaussian fields and their renormalization
--------------------------------------------------------------------------
Responsibility:
- Simulate stationary Gaussian fields on boxes of Z^nu (nu = 1, 2) with the
  model correlation r(n), by circulant embedding, spectral synthesis or
  Cholesky factorization, one independent field per replicate.
- Subordinate fields through Hermite expansions and renormalize them by
  block sums under the noncentral or the central norming.
- Exact block variances and covariances through displacement counts, the
  exact third moment of Hermite block sums, the limit variances sigma_l^2,
  finite-moment diagnostics and the psi_N -> psi_0 limit check.

Design notes:
- Replicate r of a simulator draws from the Philox stream keyed by
  (seed, "field-<method>", r), so replicate r does not depend on how many
  replicates are drawn or on the worker count.
- Circulant embeddings double their size up to three times before falling
  back to Cholesky (boxes up to 4096 points) with EmbeddingFallbackWarning.
- sigma_l^2 = sum_n r(n)^l; the limit variance of a block sum of H_l(X) under
  N^{nu/2} norming is l! sigma_l^2.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from wito.engine.chaos import MonteCarloComparison, build_regular_system
from wito.engine.domain import CorrelationModel
from wito.engine.hermite import HermiteExpansion
from wito.engine.numerics import alg_quad, gaussian_expectation, quad, richardson
from wito.engine.replicates import DEFAULT_BLOCK, map_blocks, replicate_rng
from wito.engine.spectral import (
    angular_factor,
    correlation_block,
    density_from_model,
    model_correlation,
    model_slowly_varying,
)

LOGGER = logging.getLogger(__name__)

Method = Literal["circulant", "spectral-synthesis", "cholesky"]
Regime = Literal["noncentral", "central"]

METHODS = ("circulant", "spectral-synthesis", "cholesky")
CHOLESKY_LIMIT = 4096
MAX_DOUBLINGS = 3
EIGEN_CLIP = 1e-10
MIN_REPLICATES = 1000
PSI_EPSILON = 1e-3


# ---- Exceptions ----


class EmbeddingError(RuntimeError):
    """No nonnegative definite embedding exists and Cholesky is not possible."""


class EmbeddingFallbackWarning(RuntimeWarning):
    """The circulant embedding was indefinite; Cholesky was used instead."""


class NormingError(ValueError):
    """The requested norming does not apply to the model (k alpha >= nu)."""


class SummabilityError(ValueError):
    """sum_n |r(n)|^l does not converge for the requested order."""


class InsufficientReplicatesError(ValueError):
    """Too few replicates for moment diagnostics."""


# ---- Samples ----


@dataclass(frozen=True, eq=False)
class FieldSample:
    """
    Replicated field values of shape (replicates, *box).
    - subordinator: label of the applied function ("" for the Gaussian field)
    """
    model: CorrelationModel
    box: Tuple[int, ...]
    values: np.ndarray
    seed: int
    method: str
    subordinator: str = ""

    def __post_init__(self) -> None:
        if len(self.box) != self.model.nu:
            raise ValueError(f"FieldSample.box must have {self.model.nu} sides (got {self.box})")
        if self.values.shape[1:] != tuple(self.box):
            raise ValueError(f"FieldSample.values of shape {self.values.shape} do not match box {self.box}")

    @property
    def replicates(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class RenormalizedField:
    """Z_n^N = A_N^{-1} sum_{j in B_n^N} xi_j over the reduced lattice, per replicate."""
    N: int
    norming: float
    regime: str
    values: np.ndarray


# ---- Circulant embedding ----


def _signed(m: int) -> np.ndarray:
    j = np.arange(m)
    return np.where(j <= m // 2, j, j - m)


def embedding_row(model: CorrelationModel, sizes: Sequence[int]) -> np.ndarray:
    """First row (block) of the circulant matrix on the torus of the given sizes."""
    if len(sizes) == 1:
        return model_correlation(model, _signed(sizes[0]))
    d1, d2 = np.meshgrid(_signed(sizes[0]), _signed(sizes[1]), indexing="ij")
    return model_correlation(model, np.stack([d1, d2], axis=-1))


def circulant_eigenvalues(row: np.ndarray) -> np.ndarray:
    return np.real(np.fft.fftn(row))


def _embedding_sizes(box: Sequence[int]) -> List[int]:
    return [1 << max(1, int(math.ceil(math.log2(2 * max(n - 1, 1))))) for n in box]


def _clip_eigenvalues(eig: np.ndarray) -> Optional[np.ndarray]:
    floor = -EIGEN_CLIP * float(np.max(eig))
    if float(np.min(eig)) < floor:
        return None
    return np.maximum(eig, 0.0)


@dataclass(frozen=True, eq=False)
class FieldSimulator:
    """
    Prepared sampler for one (model, box, method); picklable for worker pools.

    - embedding: eigenvalues of the circulant embedding (circulant)
    - factor: lower Cholesky factor of the box covariance (cholesky)
    - synthesis: (positive-position grid indices, positive masses, resolution) (spectral-synthesis)
    """
    model: CorrelationModel
    box: Tuple[int, ...]
    method: str
    embedding: Optional[np.ndarray] = None
    factor: Optional[np.ndarray] = None
    synthesis: Optional[Tuple[np.ndarray, np.ndarray, int]] = None

    @property
    def stream(self) -> str:
        return f"field-{self.method}"

    def sample(self, seed: int, replicate: int) -> np.ndarray:
        rng = replicate_rng(seed, self.stream, replicate)
        if self.model.is_white:
            return rng.standard_normal(self.box)
        if self.method == "circulant":
            eig = self.embedding
            z = rng.standard_normal(eig.shape) + 1j * rng.standard_normal(eig.shape)
            y = np.fft.fftn(np.sqrt(eig / eig.size) * z)
            return np.real(y)[tuple(slice(0, n) for n in self.box)]
        if self.method == "cholesky":
            return (self.factor @ rng.standard_normal(self.factor.shape[0])).reshape(self.box)
        return self._synthesize(rng)

    def _synthesize(self, rng: np.random.Generator) -> np.ndarray:
        grid_index, masses, resolution = self.synthesis
        half = masses.size
        scale = np.sqrt(0.5 * masses)
        z = (rng.standard_normal(half) + 1j * rng.standard_normal(half)) * scale
        grid = np.zeros((resolution,) * self.model.nu, dtype=complex)
        grid[tuple(grid_index.T)] = z
        grid[tuple((resolution - 1 - grid_index).T)] = np.conj(z)
        width = 2.0 * math.pi / resolution
        # X_j = sum_c Z_c e^{i j x_c} with x_c = -pi + (c + 1/2) width
        spectrum = np.fft.ifftn(grid) * grid.size
        out = spectrum[tuple(slice(0, n) for n in self.box)]
        for axis, n in enumerate(self.box):
            shape = [1] * self.model.nu
            shape[axis] = n
            out = out * np.exp(1j * np.arange(n) * (-math.pi + 0.5 * width)).reshape(shape)
        return np.real(out)

    def sample_block(self, start: int, stop: int, seed: int) -> np.ndarray:
        return np.stack([self.sample(seed, r) for r in range(start, stop)])


def box_covariance(model: CorrelationModel, box: Sequence[int]) -> np.ndarray:
    """Covariance matrix of the field over the box points in row-major order."""
    if model.nu == 1:
        return linalg.toeplitz(model_correlation(model, np.arange(box[0])))
    pts = np.stack(np.meshgrid(np.arange(box[0]), np.arange(box[1]), indexing="ij"), axis=-1).reshape(-1, 2)
    return model_correlation(model, pts[None, :, :] - pts[:, None, :])


def _cholesky_factor(model: CorrelationModel, box: Sequence[int]) -> np.ndarray:
    points = int(np.prod(box))
    if points > CHOLESKY_LIMIT:
        raise EmbeddingError(f"box {tuple(box)} has {points} points; Cholesky is limited to {CHOLESKY_LIMIT}")
    cov = box_covariance(model, box)
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise EmbeddingError(
            f"the model covariance over box {tuple(box)} is not positive definite ({model.describe()})"
        ) from exc


def build_simulator(
    model: CorrelationModel,
    box: Sequence[int],
    method: Method = "circulant",
    *,
    synthesis_resolution: Optional[int] = None,
) -> FieldSimulator:
    box = tuple(int(n) for n in box)
    if method not in METHODS:
        raise ValueError(f"unknown simulation method {method!r} (expected one of {METHODS})")
    if len(box) != model.nu or any(n < 1 for n in box):
        raise ValueError(f"box must have {model.nu} positive sides (got {box})")
    if model.is_white:
        return FieldSimulator(model, box, method)
    if method == "cholesky":
        return FieldSimulator(model, box, method, factor=_cholesky_factor(model, box))
    if method == "spectral-synthesis":
        resolution = synthesis_resolution or (1 << int(math.ceil(math.log2(4 * max(box)))))
        if resolution < max(box):
            raise ValueError(f"synthesis resolution {resolution} is smaller than the box")
        G = density_from_model(model, n=resolution)
        system = build_regular_system(G, resolution)
        half = system.pairs
        return FieldSimulator(
            model, box, method,
            synthesis=(system.grid_index[:half].copy(), system.masses[:half].copy(), resolution),
        )
    sizes = _embedding_sizes(box)
    for attempt in range(MAX_DOUBLINGS + 1):
        eig = _clip_eigenvalues(circulant_eigenvalues(embedding_row(model, sizes)))
        if eig is not None:
            LOGGER.debug("circulant embedding %s accepted after %d doublings", sizes, attempt)
            return FieldSimulator(model, box, method, embedding=eig)
        sizes = [2 * s for s in sizes]
    message = f"circulant embedding of box {box} is indefinite up to size {[s // 2 for s in sizes]}"
    if int(np.prod(box)) <= CHOLESKY_LIMIT:
        LOGGER.warning("%s; falling back to Cholesky", message)
        warnings.warn(message + "; falling back to Cholesky", EmbeddingFallbackWarning, stacklevel=2)
        return FieldSimulator(model, box, "cholesky", factor=_cholesky_factor(model, box))
    raise EmbeddingError(message)


def _sample_block(start: int, stop: int, *, simulator: FieldSimulator, seed: int) -> np.ndarray:
    return simulator.sample_block(start, stop, seed)


def simulate_field(
    model: CorrelationModel,
    box: Sequence[int],
    seed: int,
    method: Method = "circulant",
    *,
    replicates: int = 1,
    workers: int = 1,
    block: int = DEFAULT_BLOCK,
) -> FieldSample:
    """Independent stationary Gaussian fields with the model correlation, one per replicate."""
    simulator = build_simulator(model, box, method)
    values = map_blocks(
        partial(_sample_block, simulator=simulator, seed=seed), replicates, block=block, workers=workers
    )
    return FieldSample(model, tuple(box), values, seed, simulator.method)


def subordinate(sample: FieldSample, H: Union[HermiteExpansion, Callable[[np.ndarray], np.ndarray]]) -> FieldSample:
    """xi_n = H(X_n) with E H(xi) = 0 (c_0 dropped, or the Gaussian mean subtracted)."""
    if isinstance(H, HermiteExpansion):
        centered = H.centered()
        values = centered.evaluate(sample.values)
        label = f"hermite{centered.nonzero_orders()}"
    else:
        mean = gaussian_expectation(H, 120)
        values = np.asarray(H(sample.values), dtype=float) - mean
        label = getattr(H, "__name__", "function")
    return replace(sample, values=np.asarray(values, dtype=float), subordinator=label)


# ---- Renormalization ----


def norming(model: CorrelationModel, N: int, regime: Regime, k: int = 1) -> float:
    """A_N = N^{nu - k alpha/2} L(N)^{k/2} (noncentral) or N^{nu/2} (central)."""
    if N < 1:
        raise ValueError(f"N must be >= 1 (got {N})")
    if regime == "central":
        return float(N ** (model.nu / 2.0))
    if regime != "noncentral":
        raise ValueError(f"regime must be 'noncentral' or 'central' (got {regime!r})")
    if model.is_white or k * model.alpha >= model.nu:
        raise NormingError(
            f"noncentral norming needs k*alpha < nu (got k={k}, alpha={model.alpha}, nu={model.nu}); "
            "the limit integral diverges otherwise"
        )
    L = model_slowly_varying(model)
    return float(N ** (model.nu - k * model.alpha / 2.0) * float(L(N)) ** (k / 2.0))


def block_sums(values: np.ndarray, N: int) -> np.ndarray:
    """Sums over the half-open blocks of side N; values has shape (B, *box)."""
    box = values.shape[1:]
    if any(n % N for n in box):
        raise ValueError(f"box {box} is not divisible by the block size {N}")
    shape = [values.shape[0]]
    for n in box:
        shape += [n // N, N]
    return values.reshape(shape).sum(axis=tuple(range(2, 2 * len(box) + 1, 2)))


def renormalize(sample: FieldSample, N: int, regime: Regime = "noncentral", k: int = 1) -> RenormalizedField:
    A = norming(sample.model, N, regime, k)
    return RenormalizedField(N=N, norming=A, regime=regime, values=block_sums(sample.values, N) / A)


# ---- Exact moments ----


def displacement_weights(nu: int, N: int) -> np.ndarray:
    """Number of pairs (s, t) in a block of side N with t - s = l, centred at l = 0."""
    w = N - np.abs(np.arange(-(N - 1), N)).astype(float)
    return w if nu == 1 else np.multiply.outer(w, w)


def variance_exact(model: CorrelationModel, H: HermiteExpansion, N: int, A_N: float = 1.0) -> float:
    """(1/A_N^2) sum_j c_j^2 j! sum_{s,t in block} r(s-t)^j."""
    r = correlation_block(model, N)
    w = displacement_weights(model.nu, N)
    total = 0.0
    for j in H.nonzero_orders():
        total += H.coeffs[j] ** 2 * math.factorial(j) * float(np.sum(w * r ** j))
    return total / A_N ** 2


def block_covariance_exact(
    model: CorrelationModel, H: HermiteExpansion, N: int, m, A_N: float = 1.0
) -> float:
    """Cov(Z_0^N, Z_m^N) with displacements t - s = m N + l counted by prod (N - |l_i|)."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    l = np.arange(-(N - 1), N)
    if model.nu == 1:
        r = model_correlation(model, m[0] * N + l)
    else:
        d1, d2 = np.meshgrid(m[0] * N + l, m[1] * N + l, indexing="ij")
        r = model_correlation(model, np.stack([d1, d2], axis=-1))
    w = displacement_weights(model.nu, N)
    total = 0.0
    for j in H.nonzero_orders():
        total += H.coeffs[j] ** 2 * math.factorial(j) * float(np.sum(w * r ** j))
    return total / A_N ** 2


def skewness_exact(model: CorrelationModel, k: int, N: int) -> float:
    """
    Exact skewness of S = sum_{s in block} H_k(X_s):
    E S^3 = k!^3 / (k/2)!^3 * trace((R o^{k/2})^3) for even k and 0 for odd k.
    """
    if k % 2:
        return 0.0
    points = N ** model.nu
    if points > CHOLESKY_LIMIT:
        raise ValueError(f"exact skewness is limited to blocks of {CHOLESKY_LIMIT} points (got {points})")
    R = box_covariance(model, (N,) * model.nu)
    P = R ** (k // 2)
    third = math.factorial(k) ** 3 / math.factorial(k // 2) ** 3 * float(np.sum(P * (P @ P)))
    second = math.factorial(k) * float(np.sum(R ** k))
    return third / second ** 1.5


# ---- Limit variances ----


@dataclass(frozen=True)
class SigmaLimit:
    """
    l! sigma_l^2 by two routes: N^{-nu} l! sum_{s,t in block} r^l over the N grid
    (with a Richardson extrapolation) and the lattice sum l! sum_n r(n)^l.
    """
    order: int
    N_grid: Tuple[int, ...]
    block_estimates: Tuple[float, ...]
    extrapolated: float
    lattice: float
    increment_ratio: float

    @property
    def sigma_sq(self) -> float:
        return self.lattice / math.factorial(self.order)

    @property
    def relative_gap(self) -> float:
        return abs(self.extrapolated - self.lattice) / abs(self.lattice)


def _shell_sums(model: CorrelationModel, l: int, levels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Partial sums of r^l over |n|_inf <= 2^j, j = 0..levels, and the radii."""
    radii = 2 ** np.arange(levels + 1)
    R = int(radii[-1])
    if model.nu == 1:
        n = np.arange(0, R + 1)
        terms = model_correlation(model, n) ** l
        terms[1:] *= 2.0
        cum = np.cumsum(terms)
        return cum[radii], radii
    sums = []
    for radius in radii:
        ax = np.arange(-radius, radius + 1)
        d1, d2 = np.meshgrid(ax, ax, indexing="ij")
        sums.append(float(np.sum(model_correlation(model, np.stack([d1, d2], axis=-1)) ** l)))
    return np.asarray(sums), radii


def lattice_sum(model: CorrelationModel, l: int, levels: Optional[int] = None) -> Tuple[float, float]:
    """
    sum_n r(n)^l with a power-law tail correction and the dyadic increment ratio.

    Raises SummabilityError when the increments do not shrink geometrically.
    """
    if model.is_white:
        return 1.0, 0.0
    levels = levels if levels is not None else (18 if model.nu == 1 else 9)
    sums, radii = _shell_sums(model, l, levels)
    inc = np.diff(sums)
    ratio = float(inc[-1] / inc[-2]) if inc[-2] > 0 else 0.0
    if ratio >= 0.999 or l * model.alpha <= model.nu:
        raise SummabilityError(
            f"sum_n |r(n)|^{l} diverges for alpha={model.alpha}, nu={model.nu} "
            f"(dyadic increment ratio {ratio:.4f}, l*alpha={l * model.alpha:.3f})"
        )
    R = float(radii[-1])
    p = l * model.alpha
    L = model_slowly_varying(model)
    Lr = float(L(R)) ** l
    if model.nu == 1:
        tail = 2.0 * (R + 0.5) ** (1.0 - p) / (p - 1.0) * Lr
    else:
        # outside the square [-R, R]^2: the region |x|_inf > R + 1/2
        tail = _square_tail(model, p, R + 0.5) * Lr
    return float(sums[-1] + tail), ratio


def _square_tail(model: CorrelationModel, p: float, a: float) -> float:
    """int_{|x|_inf > a} |x|^{-p} a(x/|x|) dx for p > 2."""
    def radial(theta: float) -> float:
        rho0 = a / max(abs(math.cos(theta)), abs(math.sin(theta)))
        return float(angular_factor(model, theta)) * rho0 ** (2.0 - p) / (p - 2.0)

    value, _ = quad(radial, 0.0, 2.0 * math.pi, points=[0.25 * math.pi * j for j in range(1, 8)])
    return value


def sigma_limit(model: CorrelationModel, l: int, N_grid: Sequence[int]) -> SigmaLimit:
    """l! sigma_l^2 from the block sequence and from the lattice sum (they must agree)."""
    if l < 1:
        raise ValueError(f"order must be >= 1 (got {l})")
    N_grid = tuple(sorted(int(N) for N in N_grid))
    lattice, ratio = lattice_sum(model, l)
    fact = math.factorial(l)
    estimates = []
    for N in N_grid:
        r = correlation_block(model, N)
        w = displacement_weights(model.nu, N)
        estimates.append(fact * float(np.sum(w * r ** l)) / N ** model.nu)
    if len(N_grid) >= 2 and N_grid[-1] == 2 * N_grid[-2] and not model.is_white:
        order = min(l * model.alpha - model.nu, 1.0)
        extrapolated = richardson(estimates[-2], estimates[-1], order)
    else:
        extrapolated = estimates[-1]
    return SigmaLimit(
        order=l,
        N_grid=N_grid,
        block_estimates=tuple(estimates),
        extrapolated=float(extrapolated),
        lattice=fact * lattice,
        increment_ratio=ratio,
    )


def sigma_total(H: HermiteExpansion, model: CorrelationModel) -> float:
    """sigma^2 = sum_l c_l^2 l! sigma_l^2 over the nonzero coefficients."""
    total = 0.0
    for l in H.nonzero_orders():
        lattice, _ = lattice_sum(model, l)
        total += H.coeffs[l] ** 2 * math.factorial(l) * lattice
    return total


# ---- Moment diagnostics ----


@dataclass(frozen=True)
class MomentReport:
    replicates: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skewness: float
    skewness_se: float
    excess_kurtosis: float
    excess_kurtosis_se: float

    @property
    def gaussian(self) -> bool:
        return (
            abs(self.skewness) <= 4.0 * self.skewness_se
            and abs(self.excess_kurtosis) <= 4.0 * self.excess_kurtosis_se
        )

    def as_dict(self) -> Dict[str, float]:
        return {
            "replicates": self.replicates,
            "mean": self.mean,
            "mean_se": self.mean_se,
            "variance": self.variance,
            "variance_se": self.variance_se,
            "skewness": self.skewness,
            "skewness_se": self.skewness_se,
            "excess_kurtosis": self.excess_kurtosis,
            "excess_kurtosis_se": self.excess_kurtosis_se,
        }


def _moment_stats(p1, p2, p3, p4):
    m2 = p2 - p1 ** 2
    m3 = p3 - 3.0 * p1 * p2 + 2.0 * p1 ** 3
    m4 = p4 - 4.0 * p1 * p3 + 6.0 * p1 ** 2 * p2 - 3.0 * p1 ** 4
    return m2, m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def limit_diagnostics(samples, min_replicates: int = MIN_REPLICATES) -> MomentReport:
    """Mean, variance, skewness and excess kurtosis with jackknife standard errors."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < min_replicates:
        raise InsufficientReplicatesError(f"moment diagnostics need >= {min_replicates} replicates (got {n})")
    y = x - x.mean()
    powers = [y ** k for k in range(1, 5)]
    sums = [float(p.sum()) for p in powers]
    full = _moment_stats(*(s / n for s in sums))
    loo = [(s - p) / (n - 1) for s, p in zip(sums, powers)]
    var_i, skew_i, kurt_i = _moment_stats(*loo)
    # sample variance with the unbiased denominator for the leave-one-out means
    scale = (n - 1) / n

    def se(values: np.ndarray) -> float:
        return float(math.sqrt(scale * np.sum((values - values.mean()) ** 2)))

    return MomentReport(
        replicates=n,
        mean=float(x.mean()),
        mean_se=float(x.std(ddof=1) / math.sqrt(n)),
        variance=float(full[0] * n / (n - 1)),
        variance_se=se(var_i),
        skewness=float(full[1]),
        skewness_se=se(skew_i),
        excess_kurtosis=float(full[2]),
        excess_kurtosis_se=se(kurt_i),
    )


def empirical_correlation(sample: FieldSample, lags: Sequence[int]) -> List[MonteCarloComparison]:
    """
    Box-averaged X_j X_{j+n e_1} per replicate against the model r(n e_1).

    Lag 0 compares the sample variance with 1.  Replicates are independent, so
    the standard error comes from their spread.
    """
    if sample.subordinator:
        raise ValueError(f"empirical_correlation needs the Gaussian field (got {sample.subordinator!r})")
    x = sample.values
    side = sample.box[0]
    out = []
    for n in lags:
        n = int(n)
        if not 0 <= n < side:
            raise ValueError(f"lag {n} must lie in [0, {side})")
        prod = (x[:, : side - n] * x[:, n:]).reshape(x.shape[0], -1).mean(axis=1)
        lag = n if sample.model.nu == 1 else (n,) + (0,) * (sample.model.nu - 1)
        expected = float(model_correlation(sample.model, lag))
        out.append(MonteCarloComparison.from_samples(f"n={n}", prod, expected))
    return out


@dataclass(frozen=True)
class BlockStationarity:
    """Moment diagnostics per block of a renormalized field and their largest z-score against block 0."""
    reports: Tuple[MomentReport, ...]
    max_z: float
    worst: str


def block_stationarity(
    field: RenormalizedField,
    max_blocks: int = 8,
    min_replicates: int = MIN_REPLICATES,
) -> BlockStationarity:
    """
    Compare mean, variance, skewness and excess kurtosis of the first blocks of
    the reduced lattice with those of block 0, each difference in units of
    sqrt(se_j^2 + se_0^2).
    """
    flat = field.values.reshape(field.values.shape[0], -1)
    count = min(max_blocks, flat.shape[1])
    if count < 2:
        raise ValueError(f"block_stationarity needs at least two blocks (got {flat.shape[1]})")
    reports = tuple(limit_diagnostics(flat[:, j], min_replicates) for j in range(count))
    ref = reports[0].as_dict()
    max_z, worst = 0.0, ""
    for j, report in enumerate(reports[1:], start=1):
        cur = report.as_dict()
        for stat in ("mean", "variance", "skewness", "excess_kurtosis"):
            se = math.hypot(cur[f"{stat}_se"], ref[f"{stat}_se"])
            z = abs(cur[stat] - ref[stat]) / se if se > 0.0 else 0.0
            if z > max_z:
                max_z, worst = z, f"block {j} {stat}"
    LOGGER.debug("block_stationarity: N=%d blocks=%d max_z=%.3g (%s)", field.N, count, max_z, worst)
    return BlockStationarity(reports=reports, max_z=max_z, worst=worst)


# ---- psi_N -> psi_0 ----


def _as_points(model: CorrelationModel, ts) -> np.ndarray:
    arr = np.asarray(ts, dtype=float)
    if model.nu == 1:
        return arr.reshape(-1, 1)
    return arr.reshape(-1, 2)


def _limit_kernel(model: CorrelationModel, z: np.ndarray) -> np.ndarray:
    """a(z/|z|) |z|^{-alpha} for points z of shape (..., nu)."""
    if model.nu == 1:
        return np.abs(z[..., 0]) ** (-model.alpha)
    return np.hypot(z[..., 0], z[..., 1]) ** (-model.alpha) * angular_factor(
        model, np.arctan2(z[..., 1], z[..., 0])
    )


def f_n(model: CorrelationModel, ts, N: int, x) -> np.ndarray:
    """prod_i (1 - |x_i|) prod_p N^alpha r(N x + j_p) / L(N) with j_p = trunc(t_p N)."""
    pts = _as_points(model, ts)
    x = np.asarray(x, dtype=float).reshape(-1, model.nu)
    j = np.trunc(pts * N)
    L = float(model_slowly_varying(model)(N))
    out = np.prod(1.0 - np.abs(x), axis=-1)
    for jp in j:
        lag = N * x + jp
        out = out * N ** model.alpha * model_correlation(model, lag[:, 0] if model.nu == 1 else lag) / L
    return out


def f_0(model: CorrelationModel, ts, x) -> np.ndarray:
    """prod_i (1 - |x_i|) prod_p a((x+t_p)/|x+t_p|) |x + t_p|^{-alpha}."""
    pts = _as_points(model, ts)
    x = np.asarray(x, dtype=float).reshape(-1, model.nu)
    out = np.prod(1.0 - np.abs(x), axis=-1)
    for tp in pts:
        out = out * _limit_kernel(model, x + tp)
    return out


def psi_n(model: CorrelationModel, ts, N: int) -> float:
    """N^{-nu} sum_l prod_i (1 - |l_i|/N) prod_p N^alpha r(l + j_p) / L(N)."""
    pts = _as_points(model, ts)
    j = np.trunc(pts * N)
    l = np.arange(-(N - 1), N)
    L = float(model_slowly_varying(model)(N))
    w = displacement_weights(model.nu, N) / N
    out = np.array(w, dtype=float)
    for jp in j:
        if model.nu == 1:
            r = model_correlation(model, l + jp[0])
        else:
            d1, d2 = np.meshgrid(l + jp[0], l + jp[1], indexing="ij")
            r = model_correlation(model, np.stack([d1, d2], axis=-1))
        out = out * N ** model.alpha * r / L
    return float(out.sum() / N ** model.nu)


def _psi_0_1d(model: CorrelationModel, pts: np.ndarray, lo: float = -1.0, hi: float = 1.0) -> float:
    singular = [-float(t[0]) for t in pts]
    breaks = sorted({lo, hi} | {s for s in singular + [0.0] if lo < s < hi})
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        left = singular.count(a)
        right = singular.count(b)

        def regular(x: float, a=a, b=b) -> float:
            value = 1.0 - abs(x)
            for s in singular:
                if s != a and s != b:
                    value *= abs(x - s) ** (-model.alpha)
            return value

        v, _ = alg_quad(regular, a, b, exp_a=-model.alpha * left, exp_b=-model.alpha * right)
        total += v
    return total


def _psi_0_2d(model: CorrelationModel, pts: np.ndarray) -> float:
    xs = sorted({0.0} | {-float(t[0]) for t in pts if -1.0 < -t[0] < 1.0})
    ys = sorted({0.0} | {-float(t[1]) for t in pts if -1.0 < -t[1] < 1.0})

    def integrand(y: float, x: float) -> float:
        z = np.array([[x, y]]) + pts
        if np.any(np.hypot(z[:, 0], z[:, 1]) == 0.0):
            return 0.0
        return float(f_0(model, pts, np.array([x, y]))[0])

    def inner(x: float) -> float:
        v, _ = quad(integrand, -1.0, 1.0, args=(x,), points=ys, epsabs=1e-10, epsrel=1e-8)
        return v

    v, _ = quad(inner, -1.0, 1.0, points=xs, epsabs=1e-9, epsrel=1e-7)
    return v


def _ball_mass_2d(model: CorrelationModel, pts: np.ndarray, centre: Tuple[float, float], epsilon: float) -> float:
    # polar coordinates around the centre; the factor rho^{-m alpha} goes into the QAWS weight
    c = np.asarray(centre, dtype=float)
    coincident = np.all(-pts == c, axis=1)
    m = int(np.sum(coincident))
    p = m * model.alpha
    others = pts[~coincident]

    def ring(theta: float, rho: float) -> float:
        x = c + rho * np.array([math.cos(theta), math.sin(theta)])
        if np.any(np.abs(x) > 1.0):
            return 0.0
        value = float(np.prod(1.0 - np.abs(x))) * float(angular_factor(model, theta)) ** m
        for tp in others:
            value *= float(_limit_kernel(model, x + tp))
        return value

    def radial(rho: float) -> float:
        v, _ = quad(ring, 0.0, 2.0 * math.pi, args=(rho,), epsabs=1e-12, epsrel=1e-8)
        return v

    v, _ = alg_quad(radial, 0.0, epsilon, exp_a=1.0 - p, epsabs=1e-14, epsrel=1e-7)
    return v


@dataclass(frozen=True)
class PsiLimit:
    ts: Tuple[Tuple[float, ...], ...]
    N_grid: Tuple[int, ...]
    psi_n: Tuple[float, ...]
    psi_0: float
    ball_mass: float
    ball_bound: float

    @property
    def gaps(self) -> Tuple[float, ...]:
        return tuple(abs(p - self.psi_0) for p in self.psi_n)


def psi_limit_check(
    model: CorrelationModel,
    ts,
    N_grid: Sequence[int],
    epsilon: float = PSI_EPSILON,
) -> PsiLimit:
    """
    psi_N(t) by displacement sums against psi_0(t) = int_{[-1,1]^nu} f_0(t, x) dx.

    Singular points x = -t_p are integrated with algebraic weights (nu = 1) or
    as quadrature breakpoints (nu = 2).  The mass inside the epsilon-balls
    around the singular points is reported next to the per-ball bound
    2 eps^{1 - k alpha} / (1 - k alpha) for nu = 1 and
    2 pi eps^{2 - k alpha} / (2 - k alpha) for nu = 2, in polar coordinates.
    """
    pts = _as_points(model, ts)
    k = pts.shape[0]
    if model.is_white or k * model.alpha >= model.nu:
        raise NormingError(f"psi_0 needs k*alpha < nu (got k={k}, alpha={model.alpha}, nu={model.nu})")
    p = k * model.alpha
    centres = sorted({tuple(-t) for t in pts})
    if model.nu == 1:
        psi0 = _psi_0_1d(model, pts)
        bound = 2.0 * epsilon ** (1.0 - p) / (1.0 - p)
        ball = 0.0
        for (s,) in centres:
            lo, hi = max(s - epsilon, -1.0), min(s + epsilon, 1.0)
            if lo < hi:
                ball += _psi_0_1d(model, pts, lo, hi)
    else:
        psi0 = _psi_0_2d(model, pts)
        bound = 2.0 * math.pi * epsilon ** (2.0 - p) / (2.0 - p)
        ball = sum(_ball_mass_2d(model, pts, c, epsilon) for c in centres)
    values = tuple(psi_n(model, pts, int(N)) for N in N_grid)
    LOGGER.debug("psi_limit_check: k=%d psi_0=%.6g psi_N=%s", k, psi0, values)
    return PsiLimit(
        ts=tuple(tuple(float(c) for c in t) for t in pts),
        N_grid=tuple(int(N) for N in N_grid),
        psi_n=values,
        psi_0=psi0,
        ball_mass=ball,
        ball_bound=bound * len(centres),
    )


__all__ = [
    "CHOLESKY_LIMIT",
    "BlockStationarity",
    "EmbeddingError",
    "EmbeddingFallbackWarning",
    "FieldSample",
    "FieldSimulator",
    "InsufficientReplicatesError",
    "MomentReport",
    "NormingError",
    "PsiLimit",
    "RenormalizedField",
    "SigmaLimit",
    "SummabilityError",
    "block_covariance_exact",
    "block_stationarity",
    "block_sums",
    "box_covariance",
    "build_simulator",
    "circulant_eigenvalues",
    "displacement_weights",
    "embedding_row",
    "empirical_correlation",
    "f_0",
    "f_n",
    "lattice_sum",
    "limit_diagnostics",
    "norming",
    "psi_limit_check",
    "psi_n",
    "renormalize",
    "sigma_limit",
    "sigma_total",
    "simulate_field",
    "skewness_exact",
    "subordinate",
    "variance_exact",
]
