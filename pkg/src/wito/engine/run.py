"""CLI entry point for the wito verification suites.

One subcommand per suite.  Every run validates its configuration first,
executes the suite, and always leaves ``manifest.json`` in the run directory,
including when a check fails or the configuration is invalid.  Exit codes:
0 all checks passed, 1 a check failed or an unexpected error occurred,
2 invalid configuration.
"""

from __future__ import annotations

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.traceback import install as rich_traceback

from wito.engine.io import IOConfigError, build_config
from wito.engine.reporting import write_report
from wito.engine.suites import SuiteAborted, SuiteResult, run_suite
from wito.utils import build_run_dir, make_run_id, parse_run_id, slugify_run_name

app = typer.Typer(add_completion=False, help="wito — Wiener–Itô integrals: numerical verification suites")
console = Console()
rich_traceback(show_locals=False)

LOGGER = logging.getLogger("wito")

OUTPUT_ENV = "WITO_OUTPUT_DIR"

# Options shared by every suite command.
CONFIG_OPT = typer.Option(
    None, "--config", "-c", exists=True, dir_okay=False, resolve_path=True,
    help="Experiment file (YAML or JSON); overrides the profile, overridden by flags.",
)
PROFILE_OPT = typer.Option(
    None, "--profile", "-p", help="Replicate-count profile id or path (looked up under profiles/)."
)
SEED_OPT = typer.Option(None, "--seed", help="Master seed of every random stream.")
REPS_OPT = typer.Option(None, "--reps", help="Monte Carlo replicate count.")
WORKERS_OPT = typer.Option(None, "--workers", help="Worker processes for replicate blocks (results do not change).")
BLOCK_OPT = typer.Option(None, "--block", help="Replicates per block.")
OUTPUTS_OPT = typer.Option(
    Path("runs"), "--outputs", "-o", envvar=OUTPUT_ENV,
    help="Directory where run folders are created.",
)
RUN_ID_OPT = typer.Option(
    None, "--run-id", help="Run identifier naming the run folder. If omitted, a timestamp-based id is used."
)
EXPERIMENT_OPT = typer.Option(None, "--experiment", "-e", help="Experiment name (run folder and run id prefix).")
VERBOSE_OPT = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level.")


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _int_list(text: Optional[str], flag: str) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"{flag} expects comma-separated integers (got {text!r})") from exc


def _float_list(text: Optional[str], flag: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"{flag} expects comma-separated numbers (got {text!r})") from exc


def _prune(mapping: Dict[str, Any]) -> Dict[str, Any]:
    """Drop unset (None) flags and the sections left empty."""
    out: Dict[str, Any] = {}
    for key, value in mapping.items():
        if isinstance(value, dict):
            value = _prune(value)
            if value:
                out[key] = value
        elif value is not None:
            out[key] = value
    return out


def _resolve_run_id(run_id: Optional[str], experiment: str, started_at: datetime) -> str:
    if run_id:
        try:
            return parse_run_id(run_id)["id"]
        except ValueError:
            return str(run_id)
    return make_run_id(slugify_run_name(experiment, default="experiment"), started_at)


def _execute(
    suite: str,
    *,
    config: Optional[Path],
    profile: Optional[str],
    outputs: Path,
    run_id: Optional[str],
    verbose: bool,
    overrides: Dict[str, Any],
) -> None:
    """Load → run suite → report, mapping outcomes to exit codes."""
    _configure_logging(verbose)
    started_at = datetime.now(timezone.utc)
    started_iso = started_at.isoformat(timespec="seconds").replace("+00:00", "Z")
    console.print(Panel.fit(f"[bold cyan]wito {suite}[/]  [dim]{started_iso}[/]"))

    overrides = _prune(overrides)
    experiment = str(overrides.get("experiment") or "default")
    outputs_root = outputs.expanduser().resolve()
    result: Optional[SuiteResult] = None
    config_echo: Optional[Dict[str, Any]] = None
    seed: Optional[int] = overrides.get("seed")
    status = "error"
    error: Optional[str] = None
    exit_code = 1
    run_dir: Optional[Path] = None

    try:
        try:
            cfg, config_echo = build_config(suite, config_path=config, profile=profile, overrides=overrides)
        except IOConfigError:
            run_dir = build_run_dir(outputs_root, suite, experiment, _resolve_run_id(run_id, experiment, started_at))
            raise
        experiment = cfg.experiment
        seed = cfg.seed
        run_identifier = _resolve_run_id(run_id, experiment, started_at)
        run_dir = build_run_dir(outputs_root, suite, experiment, run_identifier)
        LOGGER.info("run %s: seed=%d replicates=%d workers=%d", run_identifier, cfg.seed, cfg.replicates, cfg.workers)

        result = run_suite(cfg)
        failed = result.failed
        status = "passed" if not failed else "failed"
        exit_code = 0 if not failed else 1
        if failed:
            error = "failed checks: " + "; ".join(c.name for c in failed)
    except IOConfigError as e:
        status, error, exit_code = "invalid-config", str(e), 2
        console.print(Panel.fit(f"[bold red]Configuration error[/]\n{e}", border_style="red"))
    except SuiteAborted as e:
        result = e.result
        status, error, exit_code = "error", str(e), 1
        LOGGER.error("suite %s aborted after %d rows", suite, len(result.rows), exc_info=e.cause)
        console.print(Panel.fit(f"[bold red]Suite aborted[/]\n{e}", border_style="red"))
    except Exception as e:  # pragma: no cover
        status, error, exit_code = "error", f"{type(e).__name__}: {e}", 1
        LOGGER.exception("suite %s raised", suite)
        console.print(Panel.fit(f"[bold red]Unhandled error[/]\n{e}", border_style="red"))
    finally:
        if run_dir is not None:
            manifest = write_report(
                run_dir=run_dir,
                run_id=run_dir.name,
                suite=suite,
                started_at=started_iso,
                config_echo=config_echo,
                seed=seed,
                result=result,
                status=status,
                error=error,
            )
            LOGGER.debug("manifest written with %d artifacts", len(manifest["artifacts"]))

    if result is not None:
        total = len(result.checks)
        passed = total - len(result.failed)
        if exit_code == 0:
            console.print(
                Panel.fit(
                    "\n".join([
                        "[bold green]All checks passed[/]",
                        f"Run ID: [bold]{run_dir.name}[/]",
                        f"Checks: {passed}/{total}   Rows: {len(result.rows)}",
                        f"Artifacts dir: {run_dir}",
                    ]),
                    border_style="green",
                )
            )
        elif status == "failed":
            lines = [f"Checks: {passed}/{total} passed", ""]
            lines += [f"[red]✗[/] {c.name}  [dim]{c.detail}[/]" for c in result.failed]
            lines += ["", f"Artifacts dir: {run_dir}"]
            console.print(
                Panel.fit("\n".join(lines), title="[bold yellow]Checks FAILED[/]", border_style="yellow")
            )
    if exit_code:
        raise typer.Exit(code=exit_code)


@app.callback()
def main_callback() -> None:
    """Numerical verification suites for multiple Wiener–Itô integrals."""
    return


@app.command("hermite-check")
def hermite_check(
    max_order: Optional[int] = typer.Option(None, "--max-order", help="Highest Hermite order compared."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Hermite recursion vs Rodrigues, covariances, expansions and moments."""
    _execute(
        "hermite-check", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "hermite_check": {"max_order": max_order},
        },
    )


@app.command("diagram-moments")
def diagram_moments(
    m: Optional[int] = typer.Option(None, "--m", help="Hermite order of every row."),
    max_rows: Optional[int] = typer.Option(None, "--max-rows", help="Largest number of rows p."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Diagram counts and E H_m^p, plus the diagram formula against the Wick oracle."""
    _execute(
        "diagram-moments", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "diagrams": {"m": m, "max_rows": max_rows},
        },
    )


@app.command("chaos-verify")
def chaos_verify(
    nu: Optional[int] = typer.Option(None, "--nu", help="Dimension of the spectral domain."),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Correlation decay exponent."),
    resolution: Optional[int] = typer.Option(None, "--resolution", help="Cells per axis of the regular system."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Isometry, orthogonality, Itô formula, shift and change of variables."""
    _execute(
        "chaos-verify", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "model": {"nu": nu, "alpha": alpha},
            "chaos": {"resolution": resolution},
        },
    )


@app.command("spectral-limit")
def spectral_limit(
    nu: Optional[int] = typer.Option(None, "--nu", help="Dimension of the spectral domain."),
    alphas: Optional[str] = typer.Option(None, "--alpha", help="Comma-separated decay exponents."),
    N: Optional[int] = typer.Option(None, "--N", help="Rescaling factor of G_N."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Rescaled spectral measures, the limit measure and its identities, psi_N."""
    _execute(
        "spectral-limit", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed,
            "model": {"nu": nu},
            "spectral": {"alphas": _float_list(alphas, "--alpha"), "N": N},
        },
    )


@app.command("renormalize")
def renormalize(
    nu: Optional[int] = typer.Option(None, "--nu", help="Lattice dimension."),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Correlation decay exponent."),
    k: Optional[int] = typer.Option(None, "--k", help="Hermite rank (H = H_k unless the config sets hermite)."),
    regime: Optional[str] = typer.Option(None, "--regime", help="noncentral or central."),
    N: Optional[str] = typer.Option(None, "--N", help="Comma-separated block sizes."),
    box: Optional[int] = typer.Option(None, "--box", help="Side of the simulated box (divisible by max N)."),
    method: Optional[str] = typer.Option(None, "--method", help="circulant, spectral-synthesis or cholesky."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Block sums of a subordinated field: exact variances, limits and Monte Carlo cumulants."""
    _execute(
        "renormalize", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "model": {"nu": nu, "alpha": alpha},
            "renormalize": {
                "k": k, "regime": regime, "N": _int_list(N, "--N"), "box": box, "method": method,
            },
        },
    )


@app.command("fbm")
def fbm(
    hurst: Optional[str] = typer.Option(None, "--hurst", help="Comma-separated Hurst parameters."),
    grid: Optional[int] = typer.Option(None, "--grid", help="Grid points on [0, horizon]."),
    method: Optional[str] = typer.Option(None, "--method", help="cholesky or circulant-fgn."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Fractional Brownian motion: identities, simulated covariance and spectral representation."""
    _execute(
        "fbm", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "fbm": {"hurst": _float_list(hurst, "--hurst"), "grid": grid, "method": method},
        },
    )


@app.command("tails")
def tails(
    m: Optional[str] = typer.Option(None, "--m", help="Comma-separated chaos orders."),
    config: Optional[Path] = CONFIG_OPT,
    profile: Optional[str] = PROFILE_OPT,
    seed: Optional[int] = SEED_OPT,
    reps: Optional[int] = REPS_OPT,
    workers: Optional[int] = WORKERS_OPT,
    block: Optional[int] = BLOCK_OPT,
    outputs: Path = OUTPUTS_OPT,
    run_id: Optional[str] = RUN_ID_OPT,
    experiment: Optional[str] = EXPERIMENT_OPT,
    verbose: bool = VERBOSE_OPT,
) -> None:
    """Moment bounds and tail bounds of fixed-order chaos variables."""
    _execute(
        "tails", config=config, profile=profile, outputs=outputs, run_id=run_id, verbose=verbose,
        overrides={
            "experiment": experiment, "seed": seed, "replicates": reps, "workers": workers, "block": block,
            "tails": {"orders": _int_list(m, "--m")},
        },
    )


@app.command("version")
def version() -> None:
    """Print version information."""
    try:
        from importlib.metadata import version as _pkg_version
        v = _pkg_version("wito")
    except Exception:
        v = "0.1.0 (dev)"
    console.print(f"wito {v}")


if __name__ == "__main__":
    app()
