"""
oracles.py — Independent reference computations
-----------------------------------------------
Responsibility:
- Hermite polynomials from the Rodrigues formula
  H_n(x) = (-1)^n e^{x^2/2} d^n/dx^n e^{-x^2/2}, as numpy polynomials.
- Gauss–Hermite quadrature of bivariate Hermite covariances and of moments of
  Hermite products of up to three correlated Gaussians.
- The Wick/Isserlis oracle for products of discrete Wiener–Itô sums: the
  expectation of prod_i n_i! I_G(f_i) expanded over index tuples, with
  E z^a conj(z)^b = delta_ab a! g^a for each independent cell pair.

These routines share no code path with hermite.py and diagrams.py, which they
check.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from wito.engine.diagrams import GridKernel, SystemMismatchError, same_system
from wito.engine.numerics import gauss_hermite_rule

MAX_WICK_TUPLES = 1 << 22


@lru_cache(maxsize=32)
def rodrigues_polynomial(n: int) -> Polynomial:
    """
    H_n as a polynomial; writing d^n/dx^n e^{-x^2/2} = (-1)^n q_n(x) e^{-x^2/2}
    gives q_0 = 1 and q_{n+1} = x q_n - q_n'.
    """
    if n < 0:
        raise ValueError(f"Hermite order must be >= 0 (got {n})")
    q = Polynomial([1.0])
    x = Polynomial([0.0, 1.0])
    for _ in range(n):
        q = x * q - q.deriv()
    return q


def rodrigues_hermite(n: int, x):
    return rodrigues_polynomial(n)(np.asarray(x, dtype=float))


def bivariate_hermite_covariance(j: int, l: int, r: float, q: int = 40) -> float:
    """E H_j(X) H_l(Y) for standard Gaussians with correlation r, by a 2-d product rule."""
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1] (got {r})")
    nodes, weights = gauss_hermite_rule(q)
    u, v = np.meshgrid(nodes, nodes, indexing="ij")
    w = np.outer(weights, weights)
    y = r * u + math.sqrt(max(0.0, 1.0 - r * r)) * v
    return float(np.sum(w * rodrigues_hermite(j, u) * rodrigues_hermite(l, y)))


def hermite_moment_quadrature(orders: Sequence[int], corr, q: int | None = None) -> float:
    """E prod_i H_{n_i}(X_i) for up to three standard Gaussians with correlation matrix corr."""
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    k = len(orders)
    if corr.shape != (k, k) or not 1 <= k <= 3:
        raise ValueError(f"need 1 to 3 variables with a matching correlation matrix (got {corr.shape})")
    w, V = linalg.eigh(corr)
    root = V * np.sqrt(np.maximum(w, 0.0))
    q = q or sum(orders) // 2 + 2
    nodes, weights = gauss_hermite_rule(q)
    grid = np.array(list(product(nodes, repeat=k)))
    wts = np.prod(np.array(list(product(weights, repeat=k))), axis=1)
    x = grid @ root.T
    values = np.ones(len(grid))
    for i, n in enumerate(orders):
        values = values * rodrigues_hermite(n, x[:, i])
    return float(np.dot(wts, values))


def wick_expectation(kernels: Sequence[GridKernel]) -> complex:
    """
    E prod_i (n_i! I_G(f_i)) by summing f_1(j_1) ... f_r(j_r) E prod Z_j over every
    admissible index tuple.

    Z_p for p < M are independent complex Gaussians with E|Z_p|^2 = G(Delta_p) and
    Z_{p+M} = conj Z_p.
    """
    if not kernels:
        raise ValueError("at least one kernel is required")
    system = kernels[0].system
    for k in kernels[1:]:
        if not same_system(system, k.system):
            raise SystemMismatchError("kernels are adapted to different regular systems")
    arities = [k.arity for k in kernels]
    total = sum(arities)
    size = system.size
    if total == 0:
        return complex(np.prod([k.scalar for k in kernels]))
    if size ** total > MAX_WICK_TUPLES:
        raise ValueError(f"{size}^{total} index tuples exceed the oracle limit {MAX_WICK_TUPLES}")
    half = system.pairs
    idx = np.indices((size,) * total).reshape(total, -1).T
    values = np.ones(idx.shape[0], dtype=complex)
    col = 0
    for k in kernels:
        if k.arity == 0:
            values = values * k.scalar
            continue
        values = values * k.masked()[tuple(idx[:, col:col + k.arity].T)]
        col += k.arity
    pair = idx % half
    conj = idx >= half
    fact = np.array([math.factorial(v) for v in range(total + 1)], dtype=float)
    weight = np.ones(idx.shape[0])
    for p in range(half):
        a = np.sum((pair == p) & ~conj, axis=1)
        b = np.sum((pair == p) & conj, axis=1)
        weight = weight * np.where(a == b, fact[a] * system.masses[p] ** a, 0.0)
    return complex(np.sum(values * weight))


__all__ = [
    "bivariate_hermite_covariance",
    "hermite_moment_quadrature",
    "rodrigues_hermite",
    "rodrigues_polynomial",
    "wick_expectation",
]
