"""Deterministic reporting utilities for wito runs.

The helpers in this module write the long-format result table of a suite and
the run manifest.  They are resilient to failed checks and to exceptions
raised mid-suite: whatever rows and checks were collected are written, and the
manifest records the error next to the artifacts.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import metadata
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd

from wito.engine.suites import SuiteResult
from wito.utils import suite_results_name

RESULT_COLUMNS = ("section", "parameter", "statistic", "value")
VERSIONED_PACKAGES = ("wito", "numpy", "scipy", "pandas", "pydantic", "pyyaml", "typer", "rich")


# ---------------------------------------------------------------------------
# Core dataclasses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArtifactRecord:
    """Structured description of a generated artifact."""

    path: str
    sha256: str
    kind: str

    def as_dict(self) -> Dict[str, str]:
        return {"path": self.path, "sha256": self.sha256, "kind": self.kind}


# ---------------------------------------------------------------------------
# Filesystem helpers
# ---------------------------------------------------------------------------


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_json(path: str, obj: Any, indent: int = 2) -> str:
    """Write JSON file and return its SHA256 hex digest."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=indent, default=_json_default)
        f.write("\n")
    return sha256_file(path)


def sha256_file(path: str) -> str:
    """Compute SHA256 of a file path."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_default(obj: Any) -> Any:
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    return str(obj)


def format_value(value: Any) -> str:
    """Shortest round-trip text of a result value (``repr`` for floats)."""
    if isinstance(value, bool):
        return str(int(value))
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Result tables
# ---------------------------------------------------------------------------


def results_frame(rows: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """Long-format table: one row per (section, parameter, statistic)."""
    frame = pd.DataFrame(list(rows), columns=list(RESULT_COLUMNS))
    frame["value"] = frame["value"].map(format_value)
    return frame


def write_results_csv(path: str, rows: Sequence[Mapping[str, Any]]) -> str:
    """Write the result rows as UTF-8 CSV with a header row; returns its SHA256."""
    _ensure_parent(path)
    results_frame(rows).to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return sha256_file(path)


# ---------------------------------------------------------------------------
# Manifest helpers
# ---------------------------------------------------------------------------


def library_versions() -> Dict[str, str]:
    out = {}
    for name in VERSIONED_PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


def utc_now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def build_manifest(
    *,
    run_id: str,
    suite: str,
    started_at: str,
    config_echo: Optional[Mapping[str, Any]],
    seed: Optional[int],
    result: Optional[SuiteResult],
    artifacts: Sequence[ArtifactRecord],
    status: str,
    error: Optional[str] = None,
) -> Dict[str, Any]:
    """Create manifest payload from the run metadata, suite result and artifacts."""
    checks = [c.as_dict() for c in result.checks] if result else []
    manifest: Dict[str, Any] = {
        "run": {
            "id": run_id,
            "suite": suite,
            "started_at": started_at,
            "finished_at": utc_now_iso(),
            "status": status,
        },
        "seed": seed,
        "config": dict(config_echo) if config_echo is not None else None,
        "versions": library_versions(),
        "timings_sec": dict(result.timings) if result else {},
        "checks": checks,
        "summary": {
            "checks_total": len(checks),
            "checks_failed": sum(1 for c in checks if not c["passed"]),
        },
        "artifacts": [record.as_dict() for record in artifacts],
    }
    if error:
        manifest["error"] = error
    return manifest


def write_report(
    *,
    run_dir: os.PathLike[str] | str,
    run_id: str,
    suite: str,
    started_at: str,
    config_echo: Optional[Mapping[str, Any]],
    seed: Optional[int],
    result: Optional[SuiteResult],
    status: str,
    error: Optional[str] = None,
) -> Dict[str, Any]:
    """Write ``results_<suite>.csv`` (when rows exist) and ``manifest.json``; return the manifest."""
    run_path = os.fspath(run_dir)
    os.makedirs(run_path, exist_ok=True)
    artifacts: List[ArtifactRecord] = []
    if result is not None:
        name = suite_results_name(suite)
        checksum = write_results_csv(os.path.join(run_path, name), result.rows)
        artifacts.append(ArtifactRecord(name, checksum, "table"))
    manifest = build_manifest(
        run_id=run_id,
        suite=suite,
        started_at=started_at,
        config_echo=config_echo,
        seed=seed,
        result=result,
        artifacts=artifacts,
        status=status,
        error=error,
    )
    write_json(os.path.join(run_path, "manifest.json"), manifest)
    return manifest


__all__ = [
    "ArtifactRecord",
    "build_manifest",
    "format_value",
    "library_versions",
    "results_frame",
    "sha256_file",
    "write_json",
    "write_report",
    "write_results_csv",
]
