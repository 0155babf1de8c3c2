"""Run identifiers and run-directory layout for wito experiments."""

from .run_ids import make_run_id, parse_run_id, slugify_run_name
from .run_paths import build_run_dir, suite_results_name

__all__ = ["build_run_dir", "make_run_id", "parse_run_id", "slugify_run_name", "suite_results_name"]
