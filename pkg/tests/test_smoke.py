"""
test_smoke.py — Minimal integration test for the wito pipeline
---------------------------------------------------------------
This test executes the full flow:

  build_config() → run_suite() → write_report()

It checks:
  - The merged configuration validates
  - The suite runs and every check passes
  - Reporting artifacts are created and hashed

It does NOT verify numerical correctness in depth — only integration stability.
"""

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

from wito.engine.io import build_config
from wito.engine.reporting import sha256_file, write_report
from wito.engine.suites import run_suite
from wito.utils import build_run_dir, make_run_id


def test_full_pipeline(tmp_path: Path) -> None:
    """Run hermite-check end to end and inspect the run folder."""
    cfg, echo = build_config("hermite-check", overrides={"seed": 1, "hermite_check": {"max_order": 5}})
    result = run_suite(cfg)
    assert result.passed, [c.name for c in result.failed]

    outputs_root = tmp_path / "outputs" / "runs"
    run_id = make_run_id("wito_smoke_run", datetime.now(timezone.utc))
    run_dir = build_run_dir(outputs_root, cfg.suite, cfg.experiment, run_id)
    manifest = write_report(
        run_dir=run_dir,
        run_id=run_id,
        suite=cfg.suite,
        started_at="2026-01-01T00:00:00Z",
        config_echo=echo,
        seed=cfg.seed,
        result=result,
        status="passed",
    )

    assert run_dir.parent.name == "default"
    assert run_dir.parent.parent.name == "hermite-check"
    assert run_dir.name.startswith("wito_smoke_run_")
    artifacts = {a["path"]: a["sha256"] for a in manifest["artifacts"]}
    assert set(artifacts) == {"results_hermite-check.csv"}
    table = run_dir / "results_hermite-check.csv"
    assert artifacts[table.name] == sha256_file(str(table))

    with table.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(result.rows)
    assert {r["section"] for r in rows} >= {"rodrigues", "moments"}

    on_disk = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert on_disk["seed"] == 1
    assert on_disk["summary"]["checks_failed"] == 0
    assert on_disk["run"]["suite"] == "hermite-check"
