"""
io.py — Run configuration loader
--------------------------------
Responsibility:
- Read YAML or JSON experiment files and replicate-count profiles.
- Merge sources in increasing precedence: built-in defaults < profile <
  config file < command-line overrides (nested mappings deep-merged).
- Validate the merged mapping into a frozen pydantic RunConfig before any
  computation, naming the offending field on failure.

Design notes:
- Every error raised here is an IOConfigError; the CLI maps it to exit code 2.
- A profile may carry a `defaults` mapping for every suite and a `suites`
  mapping keyed by suite name; both are plain partial RunConfig mappings.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from wito.engine.domain import CorrelationModel, FbmSpec
from wito.engine.hermite import HermiteExpansion

SUITE_NAMES = (
    "hermite-check",
    "diagram-moments",
    "chaos-verify",
    "spectral-limit",
    "renormalize",
    "fbm",
    "tails",
)

Suite = Literal[
    "hermite-check", "diagram-moments", "chaos-verify", "spectral-limit", "renormalize", "fbm", "tails"
]


# ----------------------------- Exceptions ------------------------------------


class IOConfigError(ValueError):
    """Raised when a configuration source is unreadable or fails validation."""


# ----------------------------- Sections --------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    """Correlation model r(n) = |n|^{-alpha} a(n/|n|) L(|n|) of the Gaussian field."""
    nu: int = 1
    alpha: float = 0.3
    kind: Literal["power", "white"] = "power"
    profile: Literal["cauchy", "pure"] = "cauchy"
    angular: Literal["isotropic", "axis"] = "isotropic"
    angular_amplitude: float = 0.0
    slowly_varying: Literal["constant", "log", "iterated-log", "karamata"] = "constant"
    karamata_epsilon: Literal["inv-log", "inv-sqrt-log", "inv-power"] = "inv-log"

    @model_validator(mode="after")
    def _check_model(self) -> "ModelSection":
        self.to_model()
        return self

    def to_model(self) -> CorrelationModel:
        if self.kind == "white":
            return CorrelationModel.white(self.nu)
        return CorrelationModel(**self.model_dump())


class HermiteCheckSection(_Section):
    max_order: int = Field(8, ge=1, le=20)
    correlations: Tuple[float, ...] = (-0.9, -0.5, 0.0, 0.5, 0.9)
    covariance_order: int = Field(4, ge=1, le=10)
    expansion_order: int = Field(20, ge=4, le=60)

    @field_validator("correlations")
    @classmethod
    def _in_range(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not -1.0 <= r <= 1.0 for r in v):
            raise ValueError("correlations must lie in [-1, 1]")
        return v


class DiagramSection(_Section):
    m: int = Field(2, ge=1, le=8)
    max_rows: int = Field(4, ge=1, le=16)
    wick_pairs: Tuple[int, ...] = (2, 4)
    wick_arities: Tuple[Tuple[int, ...], ...] = ((1, 1), (2, 2), (1, 1, 2), (1, 2, 3), (2, 2, 2), (1, 1, 1, 1))

    @model_validator(mode="after")
    def _check_sizes(self) -> "DiagramSection":
        if self.m * self.max_rows > 16:
            raise ValueError("m * max_rows must be <= 16")
        if any(p < 1 for p in self.wick_pairs):
            raise ValueError("wick_pairs must be >= 1")
        if any(sum(a) > 8 or min(a) < 0 for a in self.wick_arities):
            raise ValueError("wick_arities must have total arity <= 8 and nonnegative entries")
        return self


class ChaosSection(_Section):
    resolution: int = 8
    density_cells: int = 4096
    orders: Tuple[int, ...] = (1, 2, 3)
    ito_orders: Tuple[int, ...] = (2, 3)
    ito_resolutions: Tuple[int, ...] = (8, 16, 32, 64)
    ito_replicates: int = Field(200, ge=2)
    shift: Tuple[float, ...] = (3.0,)

    @model_validator(mode="after")
    def _check_resolutions(self) -> "ChaosSection":
        for name, values in (("resolution", (self.resolution,)), ("ito_resolutions", self.ito_resolutions)):
            if any(r < 2 or r % 2 for r in values):
                raise ValueError(f"{name} must be even and >= 2")
        if self.density_cells % self.resolution:
            raise ValueError("resolution must divide density_cells")
        if any(n < 1 or n > 4 for n in self.orders + self.ito_orders):
            raise ValueError("chaos orders must lie in 1..4")
        return self


class SpectralSection(_Section):
    alphas: Tuple[float, ...] = (0.3, 0.5)
    cells: int = 1 << 16
    N: int = 64
    box: Tuple[float, float] = (0.5, 1.0)
    homogeneity_t: Tuple[float, ...] = (2.0, 4.0)
    identity_t: Tuple[float, ...] = (0.0, 0.5)
    psi_t: Tuple[float, ...] = (0.0, 0.5)
    psi_N: Tuple[int, ...] = (64, 256, 1024)
    integrability_k: Tuple[int, ...] = (1, 2)

    @model_validator(mode="after")
    def _check(self) -> "SpectralSection":
        if self.cells < 2 or self.cells % 2:
            raise ValueError("cells must be even and >= 2")
        if not 0.0 < self.box[0] < self.box[1]:
            raise ValueError("box must satisfy 0 < lo < hi")
        if any(t <= 0 for t in self.homogeneity_t):
            raise ValueError("homogeneity_t must be > 0")
        return self


class RenormalizeSection(_Section):
    regime: Literal["noncentral", "central"] = "noncentral"
    k: int = Field(2, ge=1, le=8)
    hermite: Optional[Tuple[float, ...]] = None
    N: Tuple[int, ...] = (128, 256, 512, 1024)
    box: Optional[int] = None
    method: Literal["circulant", "spectral-synthesis", "cholesky"] = "circulant"
    exact_N: Tuple[int, ...] = (128, 256, 512, 1024, 2048, 4096)
    skewness_N: Tuple[int, ...] = (128, 256, 512, 1024)

    @field_validator("N", "exact_N", "skewness_N")
    @classmethod
    def _positive(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v or any(n < 1 for n in v):
            raise ValueError("every N must be a positive integer")
        return tuple(sorted(v))

    def expansion(self) -> HermiteExpansion:
        if self.hermite is None:
            return HermiteExpansion.hermite(self.k)
        return HermiteExpansion.from_coefficients(self.hermite)


class FbmSection(_Section):
    hurst: Tuple[float, ...] = (0.3, 0.5, 0.7)
    grid: int = Field(64, ge=2, le=4096)
    horizon: float = Field(1.0, gt=0.0)
    method: Literal["cholesky", "circulant-fgn"] = "cholesky"
    thin: int = Field(8, ge=1)
    scale_factors: Tuple[float, ...] = (0.5, 2.0)
    shifts: Tuple[float, ...] = (0.3, 1.7)
    spectral_pairs: int = Field(10, ge=2)

    @field_validator("hurst")
    @classmethod
    def _hurst(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        for h in v:
            FbmSpec(hurst=h, times=(1.0,))
        return v


class TailsSection(_Section):
    orders: Tuple[int, ...] = (1, 2, 3)
    moment_max: int = Field(3, ge=1, le=4)
    x_points: int = Field(12, ge=2)
    x_max_quantile: float = Field(1e-4, gt=0.0, lt=1.0)

    @field_validator("orders")
    @classmethod
    def _orders(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v or any(m < 1 or m > 6 for m in v):
            raise ValueError("tail orders must lie in 1..6")
        return v


# ----------------------------- Run config ------------------------------------


class RunConfig(_Section):
    """A validated experiment: one suite, its model and its replicate budget."""
    experiment: str = "default"
    description: Optional[str] = None
    suite: Suite
    seed: int = Field(0, ge=0)
    replicates: int = Field(10_000, ge=1)
    workers: int = Field(1, ge=1)
    block: int = Field(256, ge=1)
    model: ModelSection = ModelSection()
    hermite_check: HermiteCheckSection = HermiteCheckSection()
    diagrams: DiagramSection = DiagramSection()
    chaos: ChaosSection = ChaosSection()
    spectral: SpectralSection = SpectralSection()
    renormalize: RenormalizeSection = RenormalizeSection()
    fbm: FbmSection = FbmSection()
    tails: TailsSection = TailsSection()

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.suite == "renormalize":
            section = self.renormalize
            box = section.box if section.box is not None else max(section.N)
            if box % max(section.N):
                raise ValueError(f"renormalize.box={box} is not divisible by max(N)={max(section.N)}")
            model = self.model.to_model()
            if section.regime == "noncentral":
                if model.is_white or section.k * model.alpha >= model.nu:
                    raise ValueError(
                        f"renormalize: the noncentral regime needs k*alpha < nu "
                        f"(got k={section.k}, alpha={model.alpha}, nu={model.nu})"
                    )
        return self

    @property
    def field_box(self) -> int:
        return self.renormalize.box if self.renormalize.box is not None else max(self.renormalize.N)


# ----------------------------- Loading ---------------------------------------


def _read_mapping(path: Path) -> Dict[str, Any]:
    """Read a YAML or JSON file into a mapping (empty files give {})."""
    path = Path(path).expanduser()
    if not path.is_file():
        raise IOConfigError(f"Configuration file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            if path.suffix.lower() == ".json":
                data = json.load(fh)
            else:
                data = yaml.safe_load(fh) or {}
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise IOConfigError(f"{path.name}: cannot parse ({exc})") from exc
    if not isinstance(data, dict):
        raise IOConfigError(f"{path.name} must contain a mapping at the top level.")
    return data


def _deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def profile_candidates(profile: str, anchor: Optional[Path] = None) -> List[Path]:
    """Paths tried for a profile id or path, in order."""
    raw = Path(profile).expanduser()
    names = [raw]
    if not raw.suffix:
        names += [raw.with_suffix(".yaml"), raw.with_suffix(".yml")]
    roots = [Path.cwd()]
    if anchor is not None:
        roots.insert(0, Path(anchor).parent)
    out: List[Path] = []
    for name in names:
        if name.is_absolute():
            out.append(name)
            continue
        for root in roots:
            out.append((root / name).resolve())
            out.append((root / "profiles" / name).resolve())
            out.append((root / ".." / "profiles" / name).resolve())
    seen = set()
    unique = []
    for p in out:
        if str(p) not in seen:
            seen.add(str(p))
            unique.append(p)
    return unique


def load_profile(profile: Optional[str], suite: str, anchor: Optional[Path] = None) -> Tuple[Dict[str, Any], Optional[dict]]:
    """(partial config for the suite, profile metadata) or ({}, None) without a profile."""
    if not profile:
        return {}, None
    for candidate in profile_candidates(profile, anchor):
        if not candidate.is_file():
            continue
        data = _read_mapping(candidate)
        defaults = data.get("defaults", {}) or {}
        suites = data.get("suites", {}) or {}
        if not isinstance(defaults, dict) or not isinstance(suites, dict):
            raise IOConfigError(f"Profile '{profile}': 'defaults' and 'suites' must be mappings.")
        per_suite = suites.get(suite, {}) or {}
        if not isinstance(per_suite, dict):
            raise IOConfigError(f"Profile '{profile}': suites.{suite} must be a mapping.")
        meta = {"id": str(data.get("id") or candidate.stem), "path": str(candidate)}
        if "description" in data:
            meta["description"] = data["description"]
        return _deep_merge(defaults, per_suite), meta
    raise IOConfigError(f"Profile '{profile}' could not be located.")


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "config"
        lines.append(f"{loc}: {err.get('msg')}")
    return "; ".join(lines)


def build_config(
    suite: str,
    *,
    config_path: Optional[Path] = None,
    profile: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Tuple[RunConfig, Dict[str, Any]]:
    """
    Merge defaults < profile < config file < overrides for one suite and validate.

    Returns the RunConfig and the merged raw mapping (for the manifest).
    """
    if suite not in SUITE_NAMES:
        raise IOConfigError(f"suite: unknown suite {suite!r} (expected one of {SUITE_NAMES})")
    merged: Dict[str, Any] = {"suite": suite}
    profile_part, profile_meta = load_profile(profile, suite, config_path)
    merged = _deep_merge(merged, profile_part)
    if config_path is not None:
        file_part = _read_mapping(Path(config_path))
        if file_part.get("suite", suite) != suite:
            raise IOConfigError(
                f"suite: {Path(config_path).name} is a {file_part['suite']!r} experiment, not {suite!r}"
            )
        merged = _deep_merge(merged, file_part)
    if overrides:
        merged = _deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise IOConfigError(_format_validation(exc)) from exc
    if profile_meta:
        merged["profile"] = profile_meta
    return config, merged


def load_config(path: Path, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Validate a self-contained experiment file (its `suite` key is required)."""
    data = _read_mapping(Path(path))
    suite = data.get("suite")
    if not suite:
        raise IOConfigError(f"suite: {Path(path).name} does not name a suite")
    config, _ = build_config(str(suite), config_path=Path(path), overrides=overrides)
    return config


__all__ = [
    "ChaosSection",
    "DiagramSection",
    "FbmSection",
    "HermiteCheckSection",
    "IOConfigError",
    "ModelSection",
    "RenormalizeSection",
    "RunConfig",
    "SUITE_NAMES",
    "SpectralSection",
    "TailsSection",
    "build_config",
    "load_config",
    "load_profile",
    "profile_candidates",
]
