"""
domain.py — Core value objects
------------------------------
Immutable, typed dataclasses shared by the numerical modules: the
correlation model of a stationary Gaussian field on the lattice, the
parameters of a self-similar spectral measure, and the specification of a
fractional Brownian motion.

Design goals:
- Immutability with @dataclass(frozen=True) → safe to hand to worker processes
- Only names and numbers inside (no callables), so every object pickles
- Minimal validation in __post_init__ to catch parameter mistakes early
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Tuple

# ---------------------------
# Vocabulary
# ---------------------------
CorrelationKind = Literal["power", "white"]
CorrelationProfile = Literal["cauchy", "pure"]
AngularKind = Literal["isotropic", "axis"]
SlowlyVaryingKind = Literal["constant", "log", "iterated-log", "karamata"]

ANGULAR_KINDS = ("isotropic", "axis")
SLOWLY_VARYING_KINDS = ("constant", "log", "iterated-log", "karamata")
KARAMATA_EPSILONS = ("inv-log", "inv-sqrt-log", "inv-power")


# ---------------------------
# Value objects
# ---------------------------

@dataclass(frozen=True)
class CorrelationModel:
    """
    Correlation function r(n) = |n|^{-alpha} a(n/|n|) L(|n|) of a stationary
    Gaussian field on Z^nu, normalized so that r(0) = 1.

    - kind: "power" for the long-range model, "white" for r(n) = delta_{n,0}
    - profile: "cauchy" evaluates (1+|n|^2)^{-alpha/2} a L(sqrt(1+|n|^2)),
      which is positive definite and has the power tail; "pure" uses |n|^{-alpha}
      off the origin and must be validated before simulation
    - angular: "isotropic" (a = 1) or "axis" (a = 1 + amplitude*cos(2 theta), nu = 2)
    - slowly_varying: L kind; karamata_epsilon names the epsilon(s) of the
      Karamata representation when slowly_varying == "karamata"
    """
    nu: int
    alpha: float
    kind: CorrelationKind = "power"
    profile: CorrelationProfile = "cauchy"
    angular: AngularKind = "isotropic"
    angular_amplitude: float = 0.0
    slowly_varying: SlowlyVaryingKind = "constant"
    karamata_epsilon: str = "inv-log"

    def __post_init__(self) -> None:
        if self.nu not in (1, 2):
            raise ValueError(f"CorrelationModel.nu must be 1 or 2 (got {self.nu})")
        if self.kind not in ("power", "white"):
            raise ValueError(f"CorrelationModel.kind must be 'power' or 'white' (got {self.kind!r})")
        if self.kind == "power" and not (0.0 < self.alpha < self.nu):
            raise ValueError(
                f"CorrelationModel.alpha must satisfy 0 < alpha < nu (got alpha={self.alpha}, nu={self.nu})"
            )
        if self.profile not in ("cauchy", "pure"):
            raise ValueError(f"CorrelationModel.profile must be 'cauchy' or 'pure' (got {self.profile!r})")
        if self.angular not in ANGULAR_KINDS:
            raise ValueError(f"CorrelationModel.angular must be one of {ANGULAR_KINDS} (got {self.angular!r})")
        if self.angular == "axis":
            if self.nu != 2:
                raise ValueError("An 'axis' angular factor needs nu = 2 (a(x) = a(-x) forces a constant for nu = 1)")
            if not abs(self.angular_amplitude) < 1.0:
                raise ValueError(
                    f"CorrelationModel.angular_amplitude must lie in (-1, 1) (got {self.angular_amplitude})"
                )
        if self.slowly_varying not in SLOWLY_VARYING_KINDS:
            raise ValueError(
                f"CorrelationModel.slowly_varying must be one of {SLOWLY_VARYING_KINDS} "
                f"(got {self.slowly_varying!r})"
            )
        if self.slowly_varying == "karamata" and self.karamata_epsilon not in KARAMATA_EPSILONS:
            raise ValueError(
                f"CorrelationModel.karamata_epsilon must be one of {KARAMATA_EPSILONS} "
                f"(got {self.karamata_epsilon!r})"
            )

    @classmethod
    def white(cls, nu: int = 1) -> "CorrelationModel":
        """White noise on Z^nu (alpha is unused and set to nu/2)."""
        return cls(nu=nu, alpha=nu / 2.0, kind="white")

    @property
    def is_white(self) -> bool:
        return self.kind == "white"

    def describe(self) -> dict:
        return {
            "nu": self.nu,
            "alpha": self.alpha,
            "kind": self.kind,
            "profile": self.profile,
            "angular": self.angular,
            "angular_amplitude": self.angular_amplitude,
            "slowly_varying": self.slowly_varying,
            "karamata_epsilon": self.karamata_epsilon,
        }


@dataclass(frozen=True)
class SelfSimilarParams:
    """
    Homogeneous spectral measure G(dx) = |x|^{2 kappa - nu} a(x/|x|) dx and the
    chaos order k it is integrated against.

    kappa <= 0 or 2 kappa k >= nu is allowed here: those are the divergent
    regimes, reported as infinite by the integrability checks.
    """
    kappa: float
    k: int
    nu: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"SelfSimilarParams.k must be >= 1 (got {self.k})")
        if self.nu < 1:
            raise ValueError(f"SelfSimilarParams.nu must be >= 1 (got {self.nu})")

    @property
    def convergent(self) -> bool:
        return 0.0 < 2.0 * self.kappa * self.k < self.nu and self.kappa > 0.0

    @property
    def exponent(self) -> float:
        """Homogeneity exponent 2 kappa k - nu of J_{kappa,k}."""
        return 2.0 * self.kappa * self.k - self.nu


@dataclass(frozen=True)
class FbmSpec:
    """
    Fractional Brownian motion with Hurst parameter H on a time grid.
    - times: strictly increasing, nonnegative
    - scale: E X(1)^2 (> 0)
    """
    hurst: float
    times: Tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.hurst < 1.0):
            raise ValueError(f"FbmSpec.hurst must lie in (0, 1) (got {self.hurst})")
        if self.scale <= 0:
            raise ValueError(f"FbmSpec.scale must be > 0 (got {self.scale})")
        if len(self.times) == 0:
            raise ValueError("FbmSpec.times cannot be empty")
        if self.times[0] < 0:
            raise ValueError(f"FbmSpec.times must be >= 0 (got first time {self.times[0]})")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("FbmSpec.times must be strictly increasing")

    @classmethod
    def uniform(cls, hurst: float, n: int, horizon: float = 1.0, *, include_zero: bool = True,
                scale: float = 1.0) -> "FbmSpec":
        """n grid points k*horizon/(n-1) (include_zero) or k*horizon/n, k=1..n."""
        if n < 1:
            raise ValueError(f"FbmSpec.uniform needs n >= 1 (got {n})")
        if include_zero:
            step = horizon / max(n - 1, 1)
            times = tuple(step * i for i in range(n))
        else:
            step = horizon / n
            times = tuple(step * (i + 1) for i in range(n))
        return cls(hurst=hurst, times=times, scale=scale)


__all__ = [
    "ANGULAR_KINDS",
    "KARAMATA_EPSILONS",
    "SLOWLY_VARYING_KINDS",
    "CorrelationModel",
    "FbmSpec",
    "SelfSimilarParams",
]
