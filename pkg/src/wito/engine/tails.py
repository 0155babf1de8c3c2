"""
tails.py — Moment and tail bounds for Wiener–Itô chaos
------------------------------------------------------
Responsibility:
- Moment bounds for a variable X in the m-th chaos: the sharp form
  C(m, N) (E X^2 / m!)^N, the diagram form C(m, N) (E X^2)^N and the
  double-factorial form (2mN - 1)!! (E X^2)^N, with exact Hermite moments.
- The (m + 1)^N bound for polynomials of jointly Gaussian variables, checked by
  tensor Gauss–Hermite quadrature.
- The tail bound exp(-K_2 x^{2/m}) for x > x_0, the Monte Carlo survival of
  |H_m(xi)|, its exact law and the log-log slope of -log P.

Design notes:
- Chaos samples of order m are H_m of a standard Gaussian, the exact-in-law
  representative given by Ito's formula with a unit vector.
- tail_empirical draws fixed blocks of TAIL_BLOCK variables; block b uses the
  stream (seed, "tails-hermite", b), so counts do not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from itertools import product
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy import linalg, stats
from scipy.special import logsumexp

from wito.engine.chaos import integrate_many, kernel_second_moment, sample_batch
from wito.engine.diagrams import (
    DiagramSizeError,
    GridKernel,
    count_complete,
    double_factorial,
    moment_hermite,
)
from wito.engine.hermite import eval_hermite
from wito.engine.numerics import gauss_hermite_rule, gaussian_expectation
from wito.engine.replicates import map_blocks, replicate_rng

LOGGER = logging.getLogger(__name__)

MAX_EXACT_MN = 8
TAIL_BLOCK = 1 << 16
TAIL_STREAM = "tails-hermite"
ROOT_TOLERANCE = 1e-9


# ---- Exceptions ----


class TailRangeError(ValueError):
    """The tail bound is only claimed for x > x_0."""


# ---- Chaos variables ----


@dataclass(frozen=True, eq=False)
class ChaosVariable:
    """
    X = m! I_G(h) in the m-th chaos.
    - second_moment: E X^2 (> 0); equals m! for the Hermite representative
    - kernel: the grid kernel h, or None for X = H_m(xi)
    """
    order: int
    second_moment: float
    kernel: Optional[GridKernel] = None

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError(f"ChaosVariable.order must be >= 1 (got {self.order})")
        if not self.second_moment > 0:
            raise ValueError(f"ChaosVariable.second_moment must be > 0 (got {self.second_moment})")
        if self.kernel is None and not math.isclose(self.second_moment, math.factorial(self.order)):
            raise ValueError("the Hermite representative H_m(xi) has second moment m!")
        if self.kernel is not None and self.kernel.arity != self.order:
            raise ValueError(f"kernel arity {self.kernel.arity} does not match order {self.order}")

    @classmethod
    def hermite(cls, m: int) -> "ChaosVariable":
        return cls(order=m, second_moment=float(math.factorial(m)))

    @classmethod
    def from_kernel(cls, kernel: GridKernel) -> "ChaosVariable":
        return cls(order=kernel.arity, second_moment=kernel_second_moment(kernel), kernel=kernel)

    def sample(self, seed: int, start: int, stop: int) -> np.ndarray:
        """Values of replicates start..stop-1."""
        if self.kernel is None:
            out = np.empty(stop - start)
            for row, r in enumerate(range(start, stop)):
                out[row] = eval_hermite(self.order, replicate_rng(seed, TAIL_STREAM, r).standard_normal())
            return out
        return integrate_many(self.kernel, sample_batch(self.kernel.system, seed, start, stop))


# ---- Moments ----


@dataclass(frozen=True)
class MomentBound:
    m: int
    N: int
    second_moment: float
    diagram_count: int
    sharp: float
    diagram: float
    double_factorial: float


def moment_bound(m: int, N: int, second_moment: float) -> MomentBound:
    """Bounds on E X^{2N} for X in the m-th chaos with E X^2 = second_moment."""
    if m < 1 or N < 1:
        raise ValueError(f"moment_bound needs m, N >= 1 (got m={m}, N={N})")
    if second_moment <= 0:
        raise ValueError(f"second_moment must be > 0 (got {second_moment})")
    C = count_complete(m, 2 * N)
    return MomentBound(
        m=m,
        N=N,
        second_moment=second_moment,
        diagram_count=C,
        sharp=C * (second_moment / math.factorial(m)) ** N,
        diagram=C * second_moment ** N,
        double_factorial=double_factorial(2 * m * N - 1) * second_moment ** N,
    )


def moment_exact_hermite(m: int, p: int) -> float:
    """E H_m(xi)^p by complete-diagram enumeration (m p / 2 <= 8)."""
    if m * p > 2 * MAX_EXACT_MN:
        raise DiagramSizeError(f"exact Hermite moments are limited to m*p <= {2 * MAX_EXACT_MN} (got {m * p})")
    return moment_hermite(m, p)


def moment_quadrature_hermite(m: int, p: int) -> float:
    """E H_m(xi)^p by a Gauss–Hermite rule exact for the degree m p."""
    q = m * p // 2 + 2
    return gaussian_expectation(lambda x: eval_hermite(m, x) ** p, q)


@dataclass(frozen=True)
class PolynomialMomentCheck:
    degree: int
    N: int
    second_moment: float
    moment: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.moment <= self.bound * (1.0 + 1e-12)


def _evaluate_polynomial(poly: Mapping[Tuple[int, ...], float], x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for exps, c in poly.items():
        term = np.full(x.shape[0], float(c))
        for i, e in enumerate(exps):
            if e:
                term = term * x[:, i] ** e
        out += term
    return out


def polynomial_moment_check(poly: Mapping[Tuple[int, ...], float], cov, N: int) -> PolynomialMomentCheck:
    """
    E P^{2N} against C(m, N) (m + 1)^N (E P^2)^N for a polynomial P of degree m in
    k <= 3 jointly Gaussian variables, by a tensor Gauss–Hermite rule.

    poly maps exponent tuples to coefficients, e.g. {(2,): 1.0, (0,): -1.0}.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = cov.shape[0]
    if cov.shape != (k, k) or k > 3:
        raise ValueError(f"covariance must be square with k <= 3 (got shape {cov.shape})")
    if any(len(e) != k for e in poly):
        raise ValueError(f"every exponent tuple must have length {k}")
    m = max((sum(e) for e, c in poly.items() if c != 0.0), default=0)
    if not 1 <= m <= 4 or not 1 <= N <= 3:
        raise ValueError(f"polynomial_moment_check needs 1 <= degree <= 4 and 1 <= N <= 3 (got {m}, {N})")
    w, V = linalg.eigh(cov)
    if float(w.min()) < -1e-12:
        raise ValueError("covariance matrix is not positive semidefinite")
    root = V * np.sqrt(np.maximum(w, 0.0))
    nodes, weights = gauss_hermite_rule(m * N + 1)
    grid = np.array(list(product(nodes, repeat=k)))
    wts = np.prod(np.array(list(product(weights, repeat=k))), axis=1)
    values = _evaluate_polynomial(poly, grid @ root.T)
    second = float(np.dot(wts, values ** 2))
    moment = float(np.dot(wts, values ** (2 * N)))
    bound = count_complete(m, 2 * N) * (m + 1) ** N * second ** N
    return PolynomialMomentCheck(degree=m, N=N, second_moment=second, moment=moment, bound=bound)


# ---- Tail bound ----


@dataclass(frozen=True)
class TailConstants:
    """alpha with (2 alpha)^m E X^2 = 1/e, K_2 = alpha / 2 and x_0 = alpha^{-m/2}."""
    m: int
    second_moment: float
    alpha: float
    k2: float
    x0: float


def tail_constants(m: int, second_moment: float) -> TailConstants:
    if m < 1:
        raise ValueError(f"m must be >= 1 (got {m})")
    if second_moment <= 0:
        raise ValueError(f"second_moment must be > 0 (got {second_moment})")
    alpha = 0.5 * (1.0 / (math.e * second_moment)) ** (1.0 / m)
    return TailConstants(m=m, second_moment=second_moment, alpha=alpha, k2=0.5 * alpha, x0=alpha ** (-0.5 * m))


def tail_bound(m: int, second_moment: float, x) -> np.ndarray:
    """exp(-K_2 x^{2/m}); TailRangeError when some x <= x_0."""
    c = tail_constants(m, second_moment)
    x = np.asarray(x, dtype=float)
    if np.any(x <= c.x0):
        raise TailRangeError(f"the tail bound holds for x > x_0 = {c.x0:.6g} (got min x = {float(x.min()):.6g})")
    return np.exp(-c.k2 * x ** (2.0 / m))


@dataclass(frozen=True)
class TailEstimate:
    m: int
    xs: Tuple[float, ...]
    survival: np.ndarray
    standard_error: np.ndarray
    replicates: int


def _count_block(start: int, stop: int, *, m: int, xs: np.ndarray, seed: int, block: int) -> np.ndarray:
    rng = replicate_rng(seed, TAIL_STREAM, start // block)
    y = np.abs(eval_hermite(m, rng.standard_normal(stop - start)))
    y.sort()
    above = y.size - np.searchsorted(y, xs, side="right")
    return above[None, :].astype(np.int64)


def tail_empirical(
    m: int,
    xs: Sequence[float],
    replicates: int,
    seed: int,
    *,
    workers: int = 1,
    block: int = TAIL_BLOCK,
) -> TailEstimate:
    """Monte Carlo P(|H_m(xi)| > x) with binomial standard errors."""
    grid = np.asarray(xs, dtype=float)
    counts = map_blocks(
        partial(_count_block, m=m, xs=grid, seed=seed, block=block), replicates, block=block, workers=workers
    ).sum(axis=0)
    p = counts / replicates
    return TailEstimate(
        m=m,
        xs=tuple(float(x) for x in grid),
        survival=p,
        standard_error=np.sqrt(p * (1.0 - p) / replicates),
        replicates=replicates,
    )


def _real_roots(m: int, shift: float) -> np.ndarray:
    coeffs = np.zeros(m + 1)
    coeffs[m] = 1.0
    coeffs[0] -= shift
    roots = hermite_e.hermeroots(coeffs)
    return np.sort(roots[np.abs(np.imag(roots)) < ROOT_TOLERANCE].real)


def tail_exact_log(m: int, x: float) -> float:
    """log P(|H_m(xi)| > x) from the real roots of H_m(y) -+ x."""
    if x < 0:
        return 0.0
    cuts = np.unique(np.concatenate([_real_roots(m, x), _real_roots(m, -x)]))
    edges = np.concatenate([[-np.inf], cuts, [np.inf]])
    logs = []
    for a, b in zip(edges[:-1], edges[1:]):
        if np.isinf(a) and np.isinf(b):
            mid = 0.0
        elif np.isinf(a):
            mid = b - 1.0
        elif np.isinf(b):
            mid = a + 1.0
        else:
            mid = 0.5 * (a + b)
        if abs(eval_hermite(m, mid)) <= x:
            continue
        if np.isinf(a):
            logs.append(stats.norm.logcdf(b))
        elif np.isinf(b):
            logs.append(stats.norm.logsf(a))
        else:
            logs.append(math.log(max(stats.norm.cdf(b) - stats.norm.cdf(a), 1e-300)))
    return float(logsumexp(logs)) if logs else -math.inf


def tail_exact(m: int, xs) -> np.ndarray:
    return np.exp([tail_exact_log(m, float(x)) for x in np.atleast_1d(xs)])


@dataclass(frozen=True)
class TailSlope:
    m: int
    slope: float
    expected: float

    @property
    def ratio(self) -> float:
        return self.slope / self.expected

    def within(self, lo: float = 0.8, hi: float = 1.2) -> bool:
        return lo <= self.ratio <= hi


def tail_slope(m: int, y_range: Tuple[float, float] = (6.0, 30.0), points: int = 20) -> TailSlope:
    """
    Slope of log(-log P(|H_m(xi)| > x)) against log x on the far tail of the exact
    law, at x = H_m(y) for y geometric over y_range.
    """
    y = np.geomspace(y_range[0], y_range[1], points)
    x = np.abs(eval_hermite(m, y))
    logp = np.array([tail_exact_log(m, float(v)) for v in x])
    slope = float(np.polyfit(np.log(x), np.log(-logp), 1)[0])
    return TailSlope(m=m, slope=slope, expected=2.0 / m)


def empirical_slope(estimate: TailEstimate) -> Optional[float]:
    """The same slope from the Monte Carlo survival (points with 0 < P < 1 only)."""
    p = estimate.survival
    x = np.asarray(estimate.xs)
    keep = (p > 0.0) & (p < 1.0) & (x > 0.0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[keep]), np.log(-np.log(p[keep])), 1)[0])


def tail_table(m: int, second_moment: float, estimate: TailEstimate) -> Dict[str, np.ndarray]:
    """Columns x, empirical, standard_error, exact, bound (nan where x <= x_0)."""
    c = tail_constants(m, second_moment)
    x = np.asarray(estimate.xs)
    bound = np.where(x > c.x0, np.exp(-c.k2 * np.abs(x) ** (2.0 / m)), np.nan)
    return {
        "x": x,
        "empirical": estimate.survival,
        "standard_error": estimate.standard_error,
        "exact": tail_exact(m, x),
        "bound": bound,
    }


__all__ = [
    "ChaosVariable",
    "MomentBound",
    "PolynomialMomentCheck",
    "TailConstants",
    "TailEstimate",
    "TailRangeError",
    "TailSlope",
    "empirical_slope",
    "moment_bound",
    "moment_exact_hermite",
    "moment_quadrature_hermite",
    "polynomial_moment_check",
    "tail_bound",
    "tail_constants",
    "tail_empirical",
    "tail_exact",
    "tail_exact_log",
    "tail_slope",
    "tail_table",
]
