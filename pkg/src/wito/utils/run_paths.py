"""Run directory layout: ``<outputs>/<suite>/<experiment>/<run_id>``."""

from __future__ import annotations

from pathlib import Path

from .run_ids import slugify_run_name


def build_run_dir(
    outputs_root: Path | str,
    suite: str,
    experiment: str,
    run_id: str,
    *,
    create: bool = True,
) -> Path:
    """Return (and by default create) the run directory of one suite execution.

    Args:
        outputs_root: Base directory, usually ``$WITO_OUTPUT_DIR`` or ``runs``.
        suite: Verification suite name (``fbm``, ``tails``, ...).
        experiment: Experiment name from the run configuration.
        run_id: Identifier produced by :func:`wito.utils.make_run_id` or given
            on the command line.
        create: Create the directory hierarchy when ``True``.
    """
    run_segment = str(run_id).strip()
    if not run_segment or "/" in run_segment or run_segment in {".", ".."}:
        raise ValueError(f"Invalid run identifier for a directory name: {run_id!r}")
    run_path = (
        Path(outputs_root).expanduser()
        / slugify_run_name(suite, default="suite")
        / slugify_run_name(experiment, default="experiment")
        / run_segment
    )
    if create:
        run_path.mkdir(parents=True, exist_ok=True)
    return run_path


def suite_results_name(suite: str) -> str:
    """File name of the result table of a suite: ``results_<suite>.csv``."""
    return f"results_{slugify_run_name(suite, default='suite')}.csv"


__all__ = ["build_run_dir", "suite_results_name"]
