"""
hermite.py — Hermite polynomials and Hermite expansions
-------------------------------------------------------
Responsibility:
- Evaluate the probabilists' Hermite polynomials H_n (leading coefficient 1).
- Expand a subordinating function H(x) = sum_j c_j H_j(x) by Gauss–Hermite
  quadrature and detect its Hermite rank.
- Exact covariances E H_j(X) H_l(Y) of a standard Gaussian pair.

Design notes:
- Coefficients are stored densely up to the truncation order J.
- A coefficient counts as nonzero when |c_j| > 1e-10 * max(1, sum_j |c_j|);
  smaller values are quadrature noise and are stored as exact zeros.
- Truncation is judged by Parseval: E H(xi)^2 - sum_j c_j^2 j! must vanish.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from wito.engine.numerics import gauss_hermite_rule

LOGGER = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10
TRUNCATION_TOLERANCE = 1e-8
DEFAULT_ORDER = 20


# ---- Exceptions ----


class HermiteTruncationWarning(RuntimeWarning):
    """The expansion did not capture the full second moment within J terms."""


# ---- Polynomials ----


def eval_hermite(n: int, x):
    """H_n(x) by the three-term recursion H_n = x H_{n-1} - (n-1) H_{n-2}."""
    if n < 0:
        raise ValueError(f"Hermite order must be >= 0 (got {n})")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for j in range(1, n + 1):
        prev, cur = cur, x * cur - (j - 1) * prev
    if cur.ndim == 0:
        return float(cur)
    return cur


def hermite_table(order: int, x) -> np.ndarray:
    """Rows H_0(x), ..., H_order(x) stacked along axis 0."""
    x = np.asarray(x, dtype=float)
    table = np.empty((order + 1,) + x.shape)
    table[0] = 1.0
    if order >= 1:
        table[1] = x
    for j in range(2, order + 1):
        table[j] = x * table[j - 1] - (j - 1) * table[j - 2]
    return table


# ---- Expansions ----


def _rank_of(coeffs: np.ndarray) -> Tuple[int, np.ndarray]:
    threshold = RANK_TOLERANCE * max(1.0, float(np.sum(np.abs(coeffs))))
    cleaned = np.where(np.abs(coeffs) > threshold, coeffs, 0.0)
    nonzero = np.flatnonzero(cleaned[1:])
    rank = int(nonzero[0]) + 1 if nonzero.size else 0
    return rank, cleaned


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """
    H(x) = sum_{j=0}^{J} c_j H_j(x).

    - coeffs: c_0..c_J
    - rank: smallest j >= 1 with c_j != 0 (0 when H is constant)
    - second_moment: sum_{j>=1} c_j^2 j!  (the variance of H(xi))
    - residual: E H(xi)^2 - sum_{j>=0} c_j^2 j! (Parseval truncation residual)
    """
    coeffs: Tuple[float, ...]
    rank: int
    second_moment: float
    residual: float = 0.0

    def __post_init__(self) -> None:
        if len(self.coeffs) == 0:
            raise ValueError("HermiteExpansion.coeffs cannot be empty")
        if self.rank < 0 or self.rank >= len(self.coeffs) + 1:
            raise ValueError(f"HermiteExpansion.rank out of range (got {self.rank})")
        if self.rank >= 1:
            if any(c != 0.0 for c in self.coeffs[1:self.rank]):
                raise ValueError("HermiteExpansion: coefficients below the rank must vanish")
            if self.coeffs[self.rank] == 0.0:
                raise ValueError("HermiteExpansion: the coefficient at the rank must be nonzero")
        if not math.isfinite(self.second_moment) or self.second_moment < 0:
            raise ValueError(f"HermiteExpansion.second_moment must be finite and >= 0 (got {self.second_moment})")

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[float], residual: float = 0.0) -> "HermiteExpansion":
        arr = np.asarray(coeffs, dtype=float)
        rank, cleaned = _rank_of(arr)
        second = float(sum(c * c * math.factorial(j) for j, c in enumerate(cleaned) if j >= 1))
        return cls(coeffs=tuple(float(c) for c in cleaned), rank=rank, second_moment=second, residual=residual)

    @classmethod
    def hermite(cls, k: int, scale: float = 1.0) -> "HermiteExpansion":
        """scale * H_k."""
        if k < 1:
            raise ValueError(f"HermiteExpansion.hermite needs k >= 1 (got {k})")
        coeffs = [0.0] * (k + 1)
        coeffs[k] = float(scale)
        return cls.from_coefficients(coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_centered(self) -> bool:
        return self.coeffs[0] == 0.0

    def evaluate(self, x):
        """Sum_j c_j H_j(x) evaluated with the recursion (vectorized)."""
        x = np.asarray(x, dtype=float)
        prev = np.zeros_like(x)
        cur = np.ones_like(x)
        total = self.coeffs[0] * cur
        for j in range(1, self.order + 1):
            prev, cur = cur, x * cur - (j - 1) * prev
            if self.coeffs[j] != 0.0:
                total = total + self.coeffs[j] * cur
        if total.ndim == 0:
            return float(total)
        return total

    def __call__(self, x):
        return self.evaluate(x)

    def centered(self) -> "HermiteExpansion":
        """Drop c_0 so that E H(xi) = 0."""
        return HermiteExpansion.from_coefficients((0.0,) + tuple(self.coeffs[1:]), residual=self.residual)

    def tail(self) -> "HermiteExpansion":
        """The part strictly above the rank (coefficients c_j, j > rank)."""
        coeffs = [0.0] * len(self.coeffs)
        for j in range(self.rank + 1, len(self.coeffs)):
            coeffs[j] = self.coeffs[j]
        return HermiteExpansion.from_coefficients(coeffs)

    def nonzero_orders(self) -> Tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.coeffs) if j >= 1 and c != 0.0)


def expand_function(
    func: Callable[[np.ndarray], np.ndarray],
    max_order: int = DEFAULT_ORDER,
    quad_size: int | None = None,
) -> HermiteExpansion:
    """
    Hermite coefficients c_j = E[H(xi) H_j(xi)] / j!, j = 0..max_order.

    ``quad_size`` defaults to max(2 (J + 1), 120); a q-point rule integrates
    polynomials up to degree 2q - 1 exactly.  A HermiteTruncationWarning is
    issued when the Parseval residual exceeds 1e-8 of E H(xi)^2.
    """
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1 (got {max_order})")
    q = quad_size if quad_size is not None else max(2 * (max_order + 1), 120)
    if q < max_order + 1:
        raise ValueError(
            f"quad_size={q} cannot integrate degree-{2 * max_order} products exactly (need >= {max_order + 1})"
        )
    nodes, weights = gauss_hermite_rule(q)
    values = np.asarray(func(nodes), dtype=float)
    table = hermite_table(max_order, nodes)
    factorials = np.array([math.factorial(j) for j in range(max_order + 1)], dtype=float)
    coeffs = table @ (weights * values) / factorials

    total = float(np.dot(weights, values * values))
    captured = float(np.sum(coeffs * coeffs * factorials))
    residual = total - captured
    expansion = HermiteExpansion.from_coefficients(coeffs, residual=residual)
    if abs(residual) > TRUNCATION_TOLERANCE * max(total, 1e-300):
        message = (
            f"Hermite expansion truncated at J={max_order}: residual second moment {residual:.3e} "
            f"({residual / total:.2e} of E H^2)"
        )
        LOGGER.warning(message)
        warnings.warn(message, HermiteTruncationWarning, stacklevel=2)
    return expansion


# ---- Covariances ----


def hermite_covariance(j: int, l: int, r: float) -> float:
    """E H_j(X) H_l(Y) = delta_{jl} j! r^j for standard Gaussians with E XY = r."""
    if j < 0 or l < 0:
        raise ValueError(f"Hermite orders must be >= 0 (got {j}, {l})")
    if not -1.0 - 1e-12 <= r <= 1.0 + 1e-12:
        raise ValueError(f"correlation must lie in [-1, 1] (got {r})")
    if j != l:
        return 0.0
    return float(math.factorial(j) * r ** j)


__all__ = [
    "DEFAULT_ORDER",
    "HermiteExpansion",
    "HermiteTruncationWarning",
    "eval_hermite",
    "expand_function",
    "hermite_covariance",
    "hermite_table",
]
