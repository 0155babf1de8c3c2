"""Helpers for constructing and parsing ``<experiment>_<timestamp>`` run identifiers."""

from __future__ import annotations

import re
from datetime import datetime, timezone
from typing import Dict

_RUN_TS_RE = re.compile(r"^\d{8}T\d{6}Z$")
_RUN_ID_RE = re.compile(r"^(?P<name>[a-z0-9_\-]+)_(?P<ts>\d{8}T\d{6}Z)$")


def _coerce_timestamp(ts: datetime | str) -> str:
    if isinstance(ts, datetime):
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return ts.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")

    ts = str(ts).strip()
    if _RUN_TS_RE.fullmatch(ts):
        return ts
    try:
        parsed = datetime.fromisoformat(ts.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ValueError(f"Invalid run timestamp: {ts!r}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def slugify_run_name(name: str, *, default: str = "run") -> str:
    """Lowercase, keep [a-z0-9_-], map everything else to '-'."""
    slug = "".join(ch if ch.isalnum() or ch in {"-", "_"} else "-" for ch in str(name).lower())
    slug = slug.strip("-_")
    return slug or default


def make_run_id(experiment: str, ts: datetime | str) -> str:
    """Return the canonical ``<experiment-slug>_<YYYYmmddTHHMMSSZ>`` identifier."""
    return f"{slugify_run_name(experiment)}_{_coerce_timestamp(ts)}"


def parse_run_id(value: str) -> Dict[str, str]:
    """Split a run identifier into experiment name and UTC timestamp."""
    candidate = str(value).strip()
    match = _RUN_ID_RE.fullmatch(candidate)
    if match is None:
        raise ValueError(f"Unrecognised run identifier: {value!r}")
    name, timestamp = match.group("name"), match.group("ts")
    return {"name": name, "timestamp": timestamp, "id": f"{name}_{timestamp}"}


__all__ = ["make_run_id", "parse_run_id", "slugify_run_name"]
