"""End-to-end runs of the verification suites on small budgets."""

import pytest

from wito.engine.io import build_config
from wito.engine.suites import SUITES, SuiteAborted, SuiteContext, register_suite, run_suite


def _run(suite: str, **overrides):
    config, _ = build_config(suite, overrides=overrides)
    return run_suite(config)


def test_registry_names_every_suite() -> None:
    assert set(SUITES) == {
        "hermite-check", "diagram-moments", "chaos-verify", "spectral-limit", "renormalize", "fbm", "tails",
    }
    with pytest.raises(ValueError):
        register_suite("fbm")(lambda ctx: None)


def test_hermite_check_passes() -> None:
    result = _run("hermite-check", hermite_check={"max_order": 6})
    assert result.passed, [c.name for c in result.failed]
    assert {row["section"] for row in result.rows} >= {"rodrigues", "covariance", "expansion", "moments"}
    assert set(result.timings) == {"rodrigues", "covariance", "expansion", "moments"}


def test_diagram_moments_passes() -> None:
    result = _run(
        "diagram-moments",
        diagrams={"m": 2, "max_rows": 4, "wick_pairs": [2], "wick_arities": [[1, 1], [2, 2], [1, 1, 2]]},
    )
    assert result.passed, [c.name for c in result.failed]
    exact = {r["parameter"]: r["value"] for r in result.rows if r["statistic"] == "exact"}
    assert exact["m=2,p=4"] == 60.0


def test_tails_passes() -> None:
    result = _run("tails", replicates=4000, tails={"orders": [1, 2], "moment_max": 2, "x_points": 5})
    assert result.passed, [c.name for c in result.failed]
    assert any(r["section"] == "survival" for r in result.rows)


def test_fbm_passes() -> None:
    result = _run("fbm", replicates=2000, fbm={"hurst": [0.5], "grid": 17, "spectral_pairs": 3})
    assert result.passed, [c.name for c in result.failed]


@pytest.mark.slow
def test_noncentral_renormalization_passes() -> None:
    result = _run(
        "renormalize",
        replicates=2000,
        model={"alpha": 0.3},
        renormalize={"k": 2, "N": [16, 32], "exact_N": [16, 32, 64], "method": "cholesky"},
    )
    assert result.passed, [c.name for c in result.failed]
    sections = {row["section"] for row in result.rows}
    assert {"field", "stationarity"} <= sections


@pytest.mark.slow
def test_central_renormalization_passes() -> None:
    result = _run(
        "renormalize",
        replicates=2000,
        model={"alpha": 0.8},
        renormalize={
            "regime": "central",
            "k": 2,
            "N": [128, 256],
            "exact_N": [128, 256, 512, 1024],
            "skewness_N": [128, 256],
            "method": "circulant",
        },
    )
    assert result.passed, [c.name for c in result.failed]
    names = {c.name for c in result.checks}
    assert {"MC variance matches sigma^2", "excess kurtosis vanishes", "MC skewness matches exact"} <= names
    assert "block moments agree across blocks (N=128)" in names


@pytest.mark.slow
def test_chaos_verify_passes() -> None:
    result = _run(
        "chaos-verify",
        replicates=4000,
        chaos={"resolution": 8, "density_cells": 512, "orders": [1, 2], "ito_orders": [2], "ito_replicates": 50},
    )
    assert result.passed, [c.name for c in result.failed]
    labels = {(r["section"], r["parameter"]) for r in result.rows}
    assert {("covariance", "n=(0,)"), ("covariance", "n=(2,)")} <= labels
    assert {("product_moments", "order=1,1,2"), ("product_moments", "order=1,1,1,1")} <= labels


@pytest.mark.slow
def test_spectral_limit_passes() -> None:
    result = _run(
        "spectral-limit",
        spectral={"alphas": [0.3], "cells": 1 << 14, "psi_N": [32, 128, 512], "integrability_k": [1, 2]},
    )
    assert result.passed, [c.name for c in result.failed]
    names = {c.name for c in result.checks}
    assert "r(n) decays like n^-alpha (alpha=0.3)" in names
    assert "G_uN(uA) = u^alpha L(N)/L(uN) G_N(A) (alpha=0.3, L=log)" in names


def test_suite_exception_keeps_partial_result(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(ctx: SuiteContext) -> None:
        ctx.row("setup", "x", "value", 1.0)
        ctx.check("first check", True)
        raise RuntimeError("boom")

    monkeypatch.setitem(SUITES, "tails", broken)
    config, _ = build_config("tails")
    with pytest.raises(SuiteAborted, match="boom") as info:
        run_suite(config)
    assert len(info.value.result.rows) == 1
    assert info.value.result.checks[0].name == "first check"
    assert isinstance(info.value.cause, RuntimeError)


def test_failed_check_is_recorded() -> None:
    config, _ = build_config("tails")
    ctx = SuiteContext(config)
    assert not ctx.check("impossible", 1 > 2, "detail")
    assert ctx.result.failed[0].as_dict() == {"name": "impossible", "passed": False, "detail": "detail"}
    assert not ctx.result.passed
