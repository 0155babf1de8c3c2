"""
fbm.py — Fractional Brownian motion
-----------------------------------
Responsibility:
- Covariance R_H(s, t) = scale/2 (s^{2H} + t^{2H} - |t - s|^{2H}) and its matrix
  on a time grid.
- Exact Gaussian path simulation by Cholesky factorization or by circulant
  embedding of the fractional Gaussian noise (increment) covariance.
- Checks of self-similarity, stationary increments, Monte Carlo covariance
  and the spectral representation
  X(t) = int (e^{itu} - 1)/(iu) |u|^{1/2 - H} Z(du).

Design notes:
- Paths start at X(0) = 0 exactly whenever the grid contains t = 0.
- The spectral representation is known up to a constant; spectral_constant
  estimates it from several (s, t) pairs and compares with the closed form
  4 Gamma(2 - 2H) cos(pi H) / (2H (1 - 2H)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special

from wito.engine.domain import FbmSpec
from wito.engine.fields import CHOLESKY_LIMIT, EmbeddingError, circulant_eigenvalues
from wito.engine.numerics import alg_quad, power_cos_tail, quad
from wito.engine.replicates import DEFAULT_BLOCK, map_blocks, replicate_rng

LOGGER = logging.getLogger(__name__)

FbmMethod = Literal["cholesky", "circulant-fgn"]
FBM_METHODS = ("cholesky", "circulant-fgn")
GRID_TOLERANCE = 1e-9
SPECTRAL_CUTOFF = 50.0


# ---- Covariance ----


def covariance(spec: FbmSpec, s, t):
    """R_H(s, t) for s, t >= 0 (broadcasting)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("fBm covariance needs s, t >= 0")
    two_h = 2.0 * spec.hurst
    value = 0.5 * spec.scale * (s ** two_h + t ** two_h - np.abs(t - s) ** two_h)
    return float(value) if value.ndim == 0 else value


def covariance_matrix(spec: FbmSpec, times: Optional[Sequence[float]] = None) -> np.ndarray:
    t = np.asarray(spec.times if times is None else times, dtype=float)
    return covariance(spec, t[:, None], t[None, :])


def fgn_autocovariance(spec: FbmSpec, step: float, lags) -> np.ndarray:
    """Covariance of increments of length step at integer lags k."""
    k = np.abs(np.asarray(lags, dtype=float))
    two_h = 2.0 * spec.hurst
    return 0.5 * spec.scale * step ** two_h * (
        np.abs(k + 1.0) ** two_h - 2.0 * k ** two_h + np.abs(k - 1.0) ** two_h
    )


def _uniform_step(spec: FbmSpec) -> Tuple[float, bool]:
    """(step, starts_at_zero) of a uniform grid; ValueError otherwise."""
    t = np.asarray(spec.times, dtype=float)
    starts_at_zero = t[0] == 0.0
    points = t if starts_at_zero else np.concatenate([[0.0], t])
    if points.size < 2:
        raise ValueError("circulant-fgn needs at least one positive grid time")
    diffs = np.diff(points)
    step = float(diffs[0])
    if np.max(np.abs(diffs - step)) > GRID_TOLERANCE * max(step, 1.0):
        raise ValueError("circulant-fgn needs a uniform grid k*step starting at 0 or at step")
    return step, bool(starts_at_zero)


# ---- Simulation ----


@dataclass(frozen=True, eq=False)
class FbmSimulator:
    """
    Prepared path sampler; picklable for worker pools.

    - factor: Cholesky factor over the positive grid times (cholesky)
    - embedding: circulant eigenvalues of the increment covariance (circulant-fgn)
    """
    spec: FbmSpec
    method: str
    factor: Optional[np.ndarray] = None
    embedding: Optional[np.ndarray] = None

    @property
    def stream(self) -> str:
        return f"fbm-{self.method}"

    @property
    def zero_index(self) -> bool:
        return self.spec.times[0] == 0.0

    def sample(self, seed: int, replicate: int) -> np.ndarray:
        rng = replicate_rng(seed, self.stream, replicate)
        if self.method == "cholesky":
            positive = self.factor @ rng.standard_normal(self.factor.shape[0])
        else:
            eig = self.embedding
            n = len(self.spec.times) - (1 if self.zero_index else 0)
            z = rng.standard_normal(eig.size) + 1j * rng.standard_normal(eig.size)
            increments = np.real(np.fft.fft(np.sqrt(eig / eig.size) * z))[:n]
            positive = np.cumsum(increments)
        if self.zero_index:
            return np.concatenate([[0.0], positive])
        return positive

    def sample_block(self, start: int, stop: int, seed: int) -> np.ndarray:
        return np.stack([self.sample(seed, r) for r in range(start, stop)])


def build_fbm_simulator(spec: FbmSpec, method: FbmMethod = "cholesky") -> FbmSimulator:
    if method not in FBM_METHODS:
        raise ValueError(f"unknown fBm method {method!r} (expected one of {FBM_METHODS})")
    if method == "cholesky":
        positive = [t for t in spec.times if t > 0.0]
        if len(positive) > CHOLESKY_LIMIT:
            raise ValueError(f"cholesky is limited to {CHOLESKY_LIMIT} grid points (got {len(positive)})")
        try:
            factor = linalg.cholesky(covariance_matrix(spec, positive), lower=True)
        except linalg.LinAlgError as exc:
            raise EmbeddingError(f"fBm covariance (H={spec.hurst}) failed to factorize") from exc
        return FbmSimulator(spec, method, factor=factor)
    step, zero = _uniform_step(spec)
    n = len(spec.times) - (1 if zero else 0)
    m = 1 << max(1, int(math.ceil(math.log2(2 * n))))
    j = np.arange(m)
    row = fgn_autocovariance(spec, step, np.where(j <= m // 2, j, j - m))
    eig = circulant_eigenvalues(row)
    if float(np.min(eig)) < -1e-10 * float(np.max(eig)):
        raise EmbeddingError(f"fGn circulant embedding of size {m} is indefinite (H={spec.hurst})")
    return FbmSimulator(spec, method, embedding=np.maximum(eig, 0.0))


def _sample_block(start: int, stop: int, *, simulator: FbmSimulator, seed: int) -> np.ndarray:
    return simulator.sample_block(start, stop, seed)


def simulate(
    spec: FbmSpec,
    seed: int,
    method: FbmMethod = "cholesky",
    *,
    replicates: int = 1,
    workers: int = 1,
    block: int = DEFAULT_BLOCK,
) -> np.ndarray:
    """Paths of shape (replicates, len(times))."""
    simulator = build_fbm_simulator(spec, method)
    LOGGER.debug("fBm simulate: H=%.3f n=%d method=%s reps=%d", spec.hurst, len(spec.times), method, replicates)
    return map_blocks(
        partial(_sample_block, simulator=simulator, seed=seed), replicates, block=block, workers=workers
    )


# ---- Identities ----


def check_self_similarity(spec: FbmSpec, a: float) -> float:
    """max |R_H(as, at) - a^{2H} R_H(s, t)| / (1 + |R_H(s, t)|) over grid pairs."""
    if a <= 0:
        raise ValueError(f"scale factor must be > 0 (got {a})")
    t = np.asarray(spec.times, dtype=float)
    base = covariance_matrix(spec)
    scaled = covariance_matrix(spec, a * t)
    return float(np.max(np.abs(scaled - a ** (2.0 * spec.hurst) * base) / (1.0 + np.abs(base))))


def check_stationary_increments(spec: FbmSpec, u: float) -> float:
    """max |E[X(s+u)-X(u)][X(t+u)-X(u)] - R_H(s, t)| / (1 + |R_H(s, t)|) over grid pairs."""
    if u < 0:
        raise ValueError(f"shift must be >= 0 (got {u})")
    t = np.asarray(spec.times, dtype=float)
    s_, t_ = t[:, None], t[None, :]
    shifted = (
        covariance(spec, s_ + u, t_ + u)
        - covariance(spec, s_ + u, u)
        - covariance(spec, u, t_ + u)
        + covariance(spec, u, u)
    )
    base = covariance_matrix(spec)
    return float(np.max(np.abs(shifted - base) / (1.0 + np.abs(base))))


def increment_variance_defect(spec: FbmSpec) -> float:
    """max |E(X(t) - X(s))^2 - scale |t - s|^{2H}| over grid pairs."""
    t = np.asarray(spec.times, dtype=float)
    R = covariance_matrix(spec)
    d = np.diag(R)
    var = d[:, None] + d[None, :] - 2.0 * R
    exact = spec.scale * np.abs(t[:, None] - t[None, :]) ** (2.0 * spec.hurst)
    return float(np.max(np.abs(var - exact)))


@dataclass(frozen=True)
class CovarianceCheck:
    """Empirical E X(t_i) X(t_j) against R_H on the checked pairs."""
    pairs: int
    max_z: float
    max_abs_error: float
    replicates: int

    def passed(self, threshold: float = 4.0) -> bool:
        return self.max_z <= threshold


def covariance_check(spec: FbmSpec, paths: np.ndarray, thin: int = 8) -> CovarianceCheck:
    """
    z-scores of the empirical second moments (mean known to be 0) on the pairs
    (i, j), i <= j, of every thin-th positive grid time.
    """
    paths = np.asarray(paths, dtype=float)
    t = np.asarray(spec.times, dtype=float)
    idx = np.flatnonzero(t > 0.0)[::thin]
    n = paths.shape[0]
    worst_z = 0.0
    worst_err = 0.0
    pairs = 0
    for a, i in enumerate(idx):
        for j in idx[a:]:
            prod = paths[:, i] * paths[:, j]
            err = float(prod.mean()) - covariance(spec, t[i], t[j])
            se = float(prod.std(ddof=1)) / math.sqrt(n)
            worst_z = max(worst_z, abs(err) / se)
            worst_err = max(worst_err, abs(err))
            pairs += 1
    return CovarianceCheck(pairs=pairs, max_z=worst_z, max_abs_error=worst_err, replicates=n)


def increment_correlation(paths: np.ndarray) -> Tuple[float, float]:
    """(lag-1 correlation of path increments pooled over replicates, its standard error)."""
    inc = np.diff(np.asarray(paths, dtype=float), axis=1)
    a = inc[:, :-1].ravel()
    b = inc[:, 1:].ravel()
    corr = float(np.corrcoef(a, b)[0, 1])
    return corr, 1.0 / math.sqrt(a.size)


# ---- Spectral representation ----


def spectral_oracle_constant(hurst: float) -> float:
    """4 C_H with C_H = int_0^inf (1 - cos u) u^{-1-2H} du."""
    if abs(hurst - 0.5) < 1e-12:
        return 2.0 * math.pi
    return 4.0 * special.gamma(2.0 - 2.0 * hurst) * math.cos(math.pi * hurst) / (
        2.0 * hurst * (1.0 - 2.0 * hurst)
    )


@dataclass(frozen=True)
class SpectralCovariance:
    real: float
    imaginary: float


def spectral_covariance(hurst: float, s: float, t: float, cutoff: float = SPECTRAL_CUTOFF) -> SpectralCovariance:
    """
    int_R (e^{isu} - 1)/(iu) * conj((e^{itu} - 1)/(iu)) |u|^{1 - 2H} du.

    The real integrand is 4 sin(su/2) sin(tu/2) cos((s-t)u/2) u^{-1-2H} on u > 0
    (doubled); the head uses an algebraic weight at 0 and the tail three
    oscillatory power integrals. The imaginary part is odd in u and is
    integrated over [-cutoff, cutoff].
    """
    if not (0.0 < hurst < 1.0):
        raise ValueError(f"hurst must lie in (0, 1) (got {hurst})")
    if s < 0 or t < 0:
        raise ValueError("spectral_covariance needs s, t >= 0")
    if s == 0.0 or t == 0.0:
        return SpectralCovariance(0.0, 0.0)

    def smooth(u: float) -> float:
        if u == 0.0:
            return s * t
        return 4.0 * math.sin(0.5 * s * u) * math.sin(0.5 * t * u) * math.cos(0.5 * (s - t) * u) / (u * u)

    head, _ = alg_quad(smooth, 0.0, cutoff, exp_a=1.0 - 2.0 * hurst)
    power = -1.0 - 2.0 * hurst
    tail = cutoff ** (-2.0 * hurst) / (2.0 * hurst)
    tail -= power_cos_tail(power, s, cutoff) + power_cos_tail(power, t, cutoff)
    tail += power_cos_tail(power, s - t, cutoff)
    real = 2.0 * (head + tail)

    def odd(u: float) -> float:
        if u == 0.0:
            return 0.0
        val = (math.sin((s - t) * u) - math.sin(s * u) + math.sin(t * u)) / (u * u)
        return val * abs(u) ** (1.0 - 2.0 * hurst)

    imag, _ = quad(odd, -cutoff, cutoff, points=[0.0])
    return SpectralCovariance(real=real, imaginary=imag)


@dataclass(frozen=True)
class SpectralConstant:
    """Ratios spectral_covariance(s, t) / R_H(s, t) over the tested pairs."""
    hurst: float
    pairs: Tuple[Tuple[float, float], ...]
    ratios: Tuple[float, ...]
    constant: float
    spread: float
    oracle: float
    max_imaginary: float


def spectral_constant(hurst: float, pairs: Sequence[Tuple[float, float]]) -> SpectralConstant:
    spec = FbmSpec(hurst=hurst, times=(1.0,))
    ratios = []
    imag = 0.0
    for s, t in pairs:
        value = spectral_covariance(hurst, s, t)
        ratios.append(value.real / covariance(spec, s, t))
        imag = max(imag, abs(value.imaginary))
    arr = np.asarray(ratios)
    constant = float(arr.mean())
    spread = float(np.max(np.abs(arr - constant)) / abs(constant))
    LOGGER.debug("spectral_constant: H=%.3f constant=%.6g spread=%.2e", hurst, constant, spread)
    return SpectralConstant(
        hurst=hurst,
        pairs=tuple((float(s), float(t)) for s, t in pairs),
        ratios=tuple(float(r) for r in ratios),
        constant=constant,
        spread=spread,
        oracle=spectral_oracle_constant(hurst),
        max_imaginary=imag,
    )


__all__ = [
    "CovarianceCheck",
    "FbmSimulator",
    "SpectralConstant",
    "SpectralCovariance",
    "build_fbm_simulator",
    "check_self_similarity",
    "check_stationary_increments",
    "covariance",
    "covariance_check",
    "covariance_matrix",
    "fgn_autocovariance",
    "increment_correlation",
    "increment_variance_defect",
    "simulate",
    "spectral_constant",
    "spectral_covariance",
    "spectral_oracle_constant",
]
