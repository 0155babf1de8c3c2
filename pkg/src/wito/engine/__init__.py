"""
wito.engine — Core numerical engine
-----------------------------------
Contains the building blocks behind every verification suite: Hermite
systems, diagrams, regular systems and discrete chaos, spectral measures,
Gaussian field simulation, fractional Brownian motion and chaos tails.

Public API (developer-facing):
    - build_config: merge profile/config/flags into a validated RunConfig
    - run_suite:    execute one registered verification suite
    - write_report: result table + manifest of a run

Internal modules (not re-exported here):
    - numerics, replicates, oracles: shared helpers and reference computations
"""

from wito.engine.io import IOConfigError, RunConfig, build_config
from wito.engine.suites import SUITES, run_suite
from wito.engine.reporting import write_report

__all__ = [
    "IOConfigError",
    "RunConfig",
    "SUITES",
    "build_config",
    "run_suite",
    "write_report",
]
