"""Shared quadrature helpers.

Small wrappers around numpy/scipy rules used by several modules: the
normalized probabilists' Gauss–Hermite rule, algebraic-weight quadrature for
integrable endpoint singularities, Fourier-type tails of power functions and
Richardson extrapolation.
"""

from __future__ import annotations

import logging
import warnings
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate

LOGGER = logging.getLogger(__name__)


# ---- Exceptions ----


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature does not reach its tolerance."""


# ---- Gauss–Hermite ----


@lru_cache(maxsize=64)
def _gauss_hermite_cached(q: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermite_e.hermegauss(q)
    weights = weights / np.sqrt(2.0 * np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_rule(q: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of the q-point rule for E f(xi), xi standard normal.

    Exact for polynomials of degree <= 2q - 1; the weights sum to one.
    """
    if q < 1:
        raise ValueError(f"Gauss–Hermite rule needs q >= 1 (got {q})")
    return _gauss_hermite_cached(int(q))


def gaussian_expectation(fn: Callable[[np.ndarray], np.ndarray], q: int) -> float:
    nodes, weights = gauss_hermite_rule(q)
    return float(np.dot(weights, fn(nodes)))


# ---- Adaptive quadrature ----


def quad(
    fn: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
    limit: int = 400,
    strict: bool = False,
    **kwargs,
) -> Tuple[float, float]:
    """scipy.integrate.quad with integration warnings turned into log records.

    With ``strict=True`` a non-converged integral raises QuadratureError.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, abserr = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, **kwargs)
    if caught:
        message = str(caught[-1].message).strip().splitlines()[0]
        if strict:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {message}")
        LOGGER.debug("quad on [%s, %s]: %s (abserr=%.3g)", a, b, message, abserr)
    return float(value), float(abserr)


def alg_quad(
    fn: Callable[[float], float],
    a: float,
    b: float,
    exp_a: float = 0.0,
    exp_b: float = 0.0,
    **kwargs,
) -> Tuple[float, float]:
    """∫_a^b fn(x) (x-a)^exp_a (b-x)^exp_b dx for exponents > -1 (QAWS rule)."""
    if b <= a:
        return 0.0, 0.0
    if exp_a == 0.0 and exp_b == 0.0:
        return quad(fn, a, b, **kwargs)
    return quad(fn, a, b, weight="alg", wvar=(exp_a, exp_b), **kwargs)


def power_cos_tail(power: float, omega: float, x0: float) -> float:
    """∫_{x0}^∞ cos(omega x) x^power dx for power < 0 (power < -1 when omega = 0)."""
    if x0 <= 0:
        raise ValueError(f"x0 must be > 0 (got {x0})")
    if omega == 0.0:
        if power >= -1.0:
            return float("inf")
        return -x0 ** (power + 1.0) / (power + 1.0)
    if power >= 0.0:
        raise ValueError(f"power must be < 0 for an oscillatory tail (got {power})")
    value, _ = quad(lambda x: x ** power, x0, np.inf, weight="cos", wvar=abs(omega), limlst=200)
    return value


# ---- Extrapolation ----


def richardson(coarse: float, fine: float, order: float, ratio: float = 2.0) -> float:
    """Eliminate an error term C h^order between step h (coarse) and h/ratio (fine)."""
    if order <= 0:
        return fine
    factor = ratio ** order
    return (factor * fine - coarse) / (factor - 1.0)


__all__ = [
    "QuadratureError",
    "alg_quad",
    "gauss_hermite_rule",
    "gaussian_expectation",
    "power_cos_tail",
    "quad",
    "richardson",
]
