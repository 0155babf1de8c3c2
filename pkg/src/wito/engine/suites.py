"""
suites.py — Verification suites
-------------------------------
Responsibility:
- One function per CLI subcommand, registered by name, turning a RunConfig into
  a SuiteResult: long-format result rows (section, parameter, statistic, value)
  and named pass/fail checks.
- Wall time of every step, recorded for the manifest.

Design notes:
- Suites only orchestrate; all numerics live in the engine modules.
- Monte Carlo checks use 4-standard-error tolerances; exact identities use
  relative tolerances stated next to each check.
- All randomness flows from config.seed through named streams, so results do
  not depend on config.workers or config.block.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Callable, Dict, Iterator, List, Tuple

import numpy as np
from scipy import optimize

from wito.engine import chaos, diagrams, fbm, fields, hermite, oracles, spectral, tails
from wito.engine.domain import FbmSpec, SelfSimilarParams
from wito.engine.io import RunConfig
from wito.engine.replicates import map_blocks, replicate_rng

LOGGER = logging.getLogger(__name__)

SE_THRESHOLD = 4.0
FIELD_LAGS = (0, 1, 4, 16)
MAX_PRODUCT_DEGREE = 6


# ---- Exceptions ----


class SuiteAborted(RuntimeError):
    """A suite raised mid-run; `result` holds the rows and checks collected so far."""

    def __init__(self, result: "SuiteResult", cause: BaseException) -> None:
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.result = result
        self.cause = cause


# ---- Results ----


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class SuiteResult:
    suite: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]


class SuiteContext:
    """Collects rows, checks and step timings while a suite runs."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.result = SuiteResult(suite=config.suite)

    def row(self, section: str, parameter: str, statistic: str, value: Any) -> None:
        self.result.rows.append(
            {"section": section, "parameter": parameter, "statistic": statistic, "value": value}
        )

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        passed = bool(passed)
        self.result.checks.append(Check(name, passed, detail))
        if not passed:
            LOGGER.warning("check failed: %s (%s)", name, detail)
        return passed

    @contextmanager
    def step(self, name: str) -> Iterator[None]:
        LOGGER.info("[%s] %s", self.config.suite, name)
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.result.timings[name] = self.result.timings.get(name, 0.0) + time.perf_counter() - t0


SuiteFn = Callable[[SuiteContext], None]
SUITES: Dict[str, SuiteFn] = {}


def register_suite(name: str) -> Callable[[SuiteFn], SuiteFn]:
    def _register(fn: SuiteFn) -> SuiteFn:
        if name in SUITES:
            raise ValueError(f"suite '{name}' is already registered")
        SUITES[name] = fn
        return fn

    return _register


def run_suite(config: RunConfig) -> SuiteResult:
    try:
        fn = SUITES[config.suite]
    except KeyError as exc:
        raise ValueError(f"unknown suite {config.suite!r}") from exc
    ctx = SuiteContext(config)
    try:
        fn(ctx)
    except Exception as exc:
        raise SuiteAborted(ctx.result, exc) from exc
    LOGGER.info(
        "[%s] %d rows, %d/%d checks passed",
        config.suite, len(ctx.result.rows), len(ctx.result.checks) - len(ctx.result.failed), len(ctx.result.checks),
    )
    return ctx.result


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# ---- hermite-check ----


@register_suite("hermite-check")
def hermite_check(ctx: SuiteContext) -> None:
    section = ctx.config.hermite_check
    x = np.linspace(-4.0, 4.0, 41)
    with ctx.step("rodrigues"):
        worst = 0.0
        for n in range(section.max_order + 1):
            diff = float(np.max(np.abs(hermite.eval_hermite(n, x) - oracles.rodrigues_hermite(n, x))
                                / (1.0 + np.abs(oracles.rodrigues_hermite(n, x)))))
            ctx.row("rodrigues", f"n={n}", "max_rel_diff", diff)
            worst = max(worst, diff)
        ctx.check("hermite recursion matches Rodrigues polynomials", worst < 1e-9, f"max rel diff {worst:.2e}")
        ctx.check("H_4(0) = 3", hermite.eval_hermite(4, 0.0) == 3.0)

    with ctx.step("covariance"):
        worst = 0.0
        order = section.covariance_order
        for r in section.correlations:
            for j in range(order + 1):
                for l in range(order + 1):
                    exact = hermite.hermite_covariance(j, l, r)
                    oracle = oracles.bivariate_hermite_covariance(j, l, r)
                    worst = max(worst, abs(exact - oracle) / (1.0 + abs(oracle)))
            ctx.row("covariance", f"r={r!r}", "max_abs_diff", worst)
        ctx.check("hermite_covariance matches 2-d quadrature", worst < 1e-8, f"max diff {worst:.2e}")

    with ctx.step("expansion"):
        cubic = hermite.expand_function(lambda v: v ** 3, max_order=6)
        ctx.row("expansion", "x^3", "c_1", cubic.coeffs[1])
        ctx.row("expansion", "x^3", "c_3", cubic.coeffs[3])
        ctx.row("expansion", "x^3", "rank", cubic.rank)
        ctx.check(
            "x^3 = H_3 + 3 H_1",
            abs(cubic.coeffs[1] - 3.0) < 1e-10 and abs(cubic.coeffs[3] - 1.0) < 1e-10 and cubic.rank == 1,
        )
        mean_abs = math.sqrt(2.0 / math.pi)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", hermite.HermiteTruncationWarning)
            folded = hermite.expand_function(lambda v: np.abs(v) - mean_abs, max_order=section.expansion_order)
        ctx.row("expansion", "|x|-E|x|", "rank", folded.rank)
        ctx.row("expansion", "|x|-E|x|", "residual", folded.residual)
        ctx.row("expansion", "|x|-E|x|", "truncation_warnings", len(caught))
        ctx.check("|x| - E|x| has Hermite rank 2", folded.rank == 2)

    with ctx.step("moments"):
        worst = 0.0
        for m in (1, 2, 3):
            for N in (1, 2, 3):
                if m * N > 6:
                    continue
                exact = tails.moment_exact_hermite(m, 2 * N)
                quad = tails.moment_quadrature_hermite(m, 2 * N)
                ctx.row("moments", f"m={m},N={N}", "E H_m^2N", exact)
                worst = max(worst, abs(exact - quad) / abs(quad))
        ctx.check("Hermite moments: diagrams match quadrature", worst < 1e-9, f"max rel diff {worst:.2e}")
        ctx.check("E H_2^4 = 60 and E H_2^2 = 2",
                  tails.moment_exact_hermite(2, 4) == 60.0 and tails.moment_exact_hermite(2, 2) == 2.0)


# ---- diagram-moments ----


@register_suite("diagram-moments")
def diagram_moments(ctx: SuiteContext) -> None:
    section = ctx.config.diagrams
    m = section.m
    with ctx.step("hermite moments"):
        worst = 0.0
        for p in range(1, section.max_rows + 1):
            order = (m,) * p
            count = diagrams.count_complete_order(order)
            listed = diagrams.complete_diagrams(order)
            exact = diagrams.moment_hermite(m, p)
            quad = tails.moment_quadrature_hermite(m, p)
            ctx.row("hermite", f"m={m},p={p}", "complete_diagrams", count)
            ctx.row("hermite", f"m={m},p={p}", "exact", exact)
            ctx.row("hermite", f"m={m},p={p}", "quadrature", quad)
            ctx.check(f"enumeration matches count for {order}", len(listed) == count)
            text = diagrams.format_diagrams(listed)
            ctx.check(f"text form round-trips for {order}", diagrams.parse_diagrams(order, text) == listed)
            worst = max(worst, _rel(exact, quad))
            if p % 2 == 0:
                N = p // 2
                df = diagrams.double_factorial(2 * m * N - 1)
                ctx.row("hermite", f"m={m},N={N}", "double_factorial", df)
                ctx.check(f"C({m},{N}) <= (2mN-1)!!", count <= df, f"{count} vs {df}")
            regular = sum(1 for d in listed if diagrams.is_regular(d))
            ctx.row("hermite", f"m={m},p={p}", "regular_diagrams", regular)
        ctx.check("E H_m^p from diagrams matches quadrature", worst < 1e-9, f"max rel diff {worst:.2e}")
        terms = diagrams.expansion_terms((m, m))
        for arity in sorted({a for _, a in terms}):
            ctx.row("expansion", f"order=({m},{m})", f"terms_of_arity_{arity}",
                    sum(1 for _, a in terms if a == arity))

    with ctx.step("wick"):
        worst = 0.0
        for M in section.wick_pairs:
            rng = replicate_rng(ctx.config.seed, "diagram-wick", M)
            system = chaos.RegularSystem.from_masses(rng.uniform(0.5, 1.5, M) / M)
            for arities in section.wick_arities:
                label = f"M={M},order={tuple(arities)}"
                if system.size ** sum(arities) > oracles.MAX_WICK_TUPLES:
                    ctx.row("wick", label, "skipped", 1)
                    continue
                kernels = [chaos.random_symmetric_kernel(system, n, rng) for n in arities]
                value = diagrams.product_expectation(kernels)
                oracle = oracles.wick_expectation(kernels)
                err = abs(value - oracle.real) / max(1.0, abs(oracle))
                ctx.row("wick", label, "diagram_formula", value)
                ctx.row("wick", label, "wick_oracle", oracle.real)
                ctx.row("wick", label, "oracle_imag", oracle.imag)
                worst = max(worst, err)
        ctx.check("diagram formula matches the Wick oracle", worst < 1e-10, f"max rel err {worst:.2e}")


# ---- chaos-verify ----


def _realization_block(start: int, stop: int, *, system: chaos.RegularSystem, seed: int) -> np.ndarray:
    return chaos.sample_batch(system, seed, start, stop)


def _mc_second_moment(x: np.ndarray) -> Tuple[float, float]:
    sq = x * x
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(x.size))


@register_suite("chaos-verify")
def chaos_verify(ctx: SuiteContext) -> None:
    cfg = ctx.config
    section = cfg.chaos
    model = cfg.model.to_model()
    with ctx.step("system"):
        G = spectral.density_from_model(model, n=section.density_cells)
        system = chaos.build_regular_system(G, section.resolution)
        for key, value in system.describe().items():
            ctx.row("system", "regular", key, value)
    with ctx.step("sample"):
        Z = map_blocks(
            partial(_realization_block, system=system, seed=cfg.seed),
            cfg.replicates, block=cfg.block, workers=cfg.workers,
        )

    with ctx.step("isometry"):
        values: Dict[int, np.ndarray] = {}
        kernels: Dict[int, diagrams.GridKernel] = {}
        for n in section.orders:
            kernel = chaos.random_symmetric_kernel(system, n, replicate_rng(cfg.seed, "chaos-kernels", n))
            kernels[n] = kernel
            expected = chaos.kernel_second_moment(kernel)
            x = chaos.integrate_many(kernel, Z)
            values[n] = x
            mc, se = _mc_second_moment(x)
            ctx.row("isometry", f"n={n}", "expected", expected)
            ctx.row("isometry", f"n={n}", "mc", mc)
            ctx.row("isometry", f"n={n}", "se", se)
            ctx.check(f"isometry n={n}", abs(mc - expected) <= SE_THRESHOLD * se,
                      f"{mc:.6g} vs {expected:.6g} (se {se:.3g})")
            mean_se = float(x.std(ddof=1) / math.sqrt(x.size))
            ctx.check(f"zero mean n={n}", abs(float(x.mean())) <= SE_THRESHOLD * mean_se)
        orders = sorted(values)
        for i, a in enumerate(orders):
            for b in orders[i + 1:]:
                prod = values[a] * values[b]
                mc = float(prod.mean())
                se = float(prod.std(ddof=1) / math.sqrt(prod.size))
                ctx.row("orthogonality", f"n={a},{b}", "mc", mc)
                ctx.row("orthogonality", f"n={a},{b}", "se", se)
                ctx.check(f"orthogonality n={a},{b}", abs(mc) <= SE_THRESHOLD * se)

    with ctx.step("realization covariance"):
        lags = [(n,) + (0,) * (model.nu - 1) for n in range(system.to_density().max_lag + 1)]
        for cmp in chaos.realization_covariance(system, Z, lags):
            ctx.row("covariance", cmp.label, "mc", cmp.mc)
            ctx.row("covariance", cmp.label, "se", cmp.se)
            ctx.row("covariance", cmp.label, "expected", cmp.expected)
            ctx.check(f"E X_0 X_n matches r(n) ({cmp.label})", cmp.passed(SE_THRESHOLD),
                      f"{cmp.mc:.6g} vs {cmp.expected:.6g} (se {cmp.se:.3g})")

    with ctx.step("product moments"):
        for size in (3, 4):
            for combo in itertools.combinations_with_replacement(sorted(kernels), size):
                if sum(combo) % 2 or sum(combo) > MAX_PRODUCT_DEGREE:
                    continue
                cmp = chaos.product_moment_check([kernels[n] for n in combo], Z)
                ctx.row("product_moments", cmp.label, "mc", cmp.mc)
                ctx.row("product_moments", cmp.label, "se", cmp.se)
                ctx.row("product_moments", cmp.label, "diagram_formula", cmp.expected)
                ctx.check(f"MC product moment matches the diagram formula ({cmp.label})",
                          cmp.passed(SE_THRESHOLD), f"{cmp.mc:.6g} vs {cmp.expected:.6g} (se {cmp.se:.3g})")

    with ctx.step("ito"):
        for n in section.ito_orders:
            study = chaos.ito_refinement_study(
                n, section.ito_resolutions, seed=cfg.seed, replicates=section.ito_replicates, nu=2,
            )
            for res, err in zip(study.resolutions, study.rms_relative_error):
                ctx.row("ito", f"n={n}", f"rms_rel_error@{res}", err)
            ctx.check(f"Ito refinement n={n} decreases", study.monotone)
            ctx.check(f"Ito refinement n={n} finest < 5%", study.rms_relative_error[-1] < 0.05,
                      f"{study.rms_relative_error[-1]:.4f}")
        half = system.pairs
        phis = []
        for c in (0, 1):
            v = np.zeros(system.size, dtype=complex)
            v[[c, c + half]] = 1.0 / math.sqrt(2.0 * system.masses[c])
            phis.append(diagrams.GridKernel(system, v))
        mixed = chaos.ito_compare(phis, [1, 1], Z[: min(200, Z.shape[0])])
        ctx.row("ito", "disjoint", "max_abs_diff", float(mixed.diff.max()))
        ctx.check("Ito formula for disjoint unit vectors", float(mixed.diff.max()) < 1e-10)

    with ctx.step("shift"):
        kernel = chaos.random_symmetric_kernel(system, 2, replicate_rng(cfg.seed, "chaos-shift", 0))
        t = tuple(section.shift[: model.nu]) + (0.0,) * max(0, model.nu - len(section.shift))
        shifted = chaos.shift_kernel(kernel, t)
        phase = chaos.phase_kernel(system, t).values
        sub = Z[: min(500, Z.shape[0])]
        lhs = chaos.integrate_many(shifted, sub)
        rhs = chaos.integrate_many(kernel, sub * phase[None, :])
        diff = float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(rhs))))
        ctx.row("shift", f"t={t}", "max_rel_diff", diff)
        ctx.check("shift acts on kernels as on the spectral measure", diff < 1e-10)
        moments = (chaos.kernel_second_moment(shifted), chaos.kernel_second_moment(kernel))
        ctx.check("shift preserves the second moment", _rel(*moments) < 1e-12)

    with ctx.step("change of variables"):
        def multiplier(c: np.ndarray) -> np.ndarray:
            return (1.0 + 0.5 * np.cos(c[:, 0])) * np.exp(1j * c[:, 0])

        kernel = chaos.random_symmetric_kernel(system, 2, replicate_rng(cfg.seed, "chaos-change", 0))
        moved, new_system = chaos.change_of_variables(kernel, multiplier)
        g = multiplier(system.centers)
        sub = Z[: min(500, Z.shape[0])]
        lhs = chaos.integrate_many(moved, sub / g[None, :])
        rhs = chaos.integrate_many(kernel, sub)
        diff = float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(rhs))))
        ctx.row("change_of_variables", "g=(1+cos/2)e^{ix}", "max_rel_diff", diff)
        ctx.row("change_of_variables", "g=(1+cos/2)e^{ix}", "new_total_mass", new_system.total_mass)
        ctx.check("change of variables preserves realizations", diff < 1e-10)
        ctx.check("change of variables preserves the second moment",
                  _rel(chaos.kernel_second_moment(moved), chaos.kernel_second_moment(kernel)) < 1e-10)


# ---- spectral-limit ----


@register_suite("spectral-limit")
def spectral_limit(ctx: SuiteContext) -> None:
    section = ctx.config.spectral
    base = ctx.config.model.to_model()
    lo = (section.box[0],) * base.nu
    hi = (section.box[1],) * base.nu
    for alpha in section.alphas:
        model = replace(base, kind="power", alpha=alpha)
        tag = f"alpha={alpha!r}"
        with ctx.step(f"homogeneity {tag}"):
            G = spectral.density_from_model(model, n=section.cells, normalization="tail")
            G_N = spectral.rescale(G, section.N, model)
            for t in section.homogeneity_t:
                ratio = spectral.homogeneity_ratio(G_N, lo, hi, t)
                target = t ** alpha
                ctx.row("homogeneity", f"{tag},t={t!r}", "ratio", ratio)
                ctx.row("homogeneity", f"{tag},t={t!r}", "t^alpha", target)
                ctx.check(f"G_0(tA)/G_0(A) = t^alpha ({tag}, t={t})", abs(ratio / target - 1.0) < 0.02,
                          f"{ratio:.6g} vs {target:.6g}")
            fitted = spectral.fit_limit_measure(G_N, model, lo, hi)
            exact_c = 1.0 / spectral.riesz_constant(model.nu, alpha)
            ctx.row("limit_measure", tag, "fitted_constant", fitted.constant)
            ctx.row("limit_measure", tag, "inverse_riesz_constant", exact_c)
            ctx.check(f"fitted limit constant ({tag})", abs(fitted.constant / exact_c - 1.0) < 0.01)

        with ctx.step(f"scaling {tag}"):
            log_model = replace(model, slowly_varying="log")
            G_log = spectral.density_from_model(log_model, n=section.cells)
            defect = spectral.rescale_scaling_defect(G_log, log_model, section.N, 2.0, lo, hi)
            ctx.row("scaling", f"{tag},L=log,u=2", "relative_defect", defect)
            ctx.check(f"G_uN(uA) = u^alpha L(N)/L(uN) G_N(A) ({tag}, L=log)", defect < 1e-9,
                      f"relative defect {defect:.2e}")
            if model.nu == 1 and G.max_lag >= 256:
                slope = spectral.decay_exponent(G, range(32, 257))
                ctx.row("decay", tag, "log_log_slope", slope)
                ctx.check(f"r(n) decays like n^-alpha ({tag})", abs(slope + alpha) < 0.05,
                          f"slope {slope:.4f} on n in [32, 256]")

        if model.nu == 1 or model.angular == "isotropic":
            with ctx.step(f"triangle identity {tag}"):
                limit = spectral.LimitMeasure(model, exact_c)
                for t in section.identity_t:
                    point = (t,) * model.nu
                    res = spectral.check_triangle_identity(limit, point)
                    rel = res.diff / abs(res.rhs)
                    ctx.row("triangle_identity", f"{tag},t={t!r}", "lhs", res.lhs)
                    ctx.row("triangle_identity", f"{tag},t={t!r}", "rhs", res.rhs)
                    ctx.check(f"triangle identity ({tag}, t={t})", rel < 1e-3, f"rel diff {rel:.2e}")

        with ctx.step(f"psi {tag}"):
            ts = [(t,) * model.nu for t in section.psi_t]
            if len(ts) * alpha >= model.nu:
                ctx.row("psi", tag, "skipped", 1)
            else:
                psi = fields.psi_limit_check(model, ts, section.psi_N)
                for N, value, gap in zip(psi.N_grid, psi.psi_n, psi.gaps):
                    ctx.row("psi", f"{tag},N={N}", "psi_N", value)
                    ctx.row("psi", f"{tag},N={N}", "gap", gap)
                ctx.row("psi", tag, "psi_0", psi.psi_0)
                ctx.row("psi", tag, "ball_mass", psi.ball_mass)
                ctx.row("psi", tag, "ball_bound", psi.ball_bound)
                ctx.check(f"psi_N approaches psi_0 ({tag})", psi.gaps[-1] < psi.gaps[0],
                          f"gaps {psi.gaps}")

    with ctx.step("slowly varying"):
        t_grid = np.geomspace(1e2, 1e8, 7)
        for kind in ("log", "iterated-log", "karamata"):
            report = spectral.karamata_ratio_test(spectral.slowly_varying(kind), (0.5, 2.0, 10.0), t_grid)
            ctx.row("slowly_varying", kind, "max_deviation", report.max_deviation)
            ctx.row("slowly_varying", kind, "last_deviation", report.deviations[-1])
            ctx.check(f"L(st)/L(t) -> 1 for {kind}", report.decreasing)

    with ctx.step("integrability"):
        for k in section.integrability_k:
            for report in spectral.boundary_scan(base.nu, k):
                params = SelfSimilarParams(kappa=report.kappa, k=k, nu=base.nu)
                label = f"k={k},kappa={report.kappa:.4f}"
                ctx.row("integrability", label, "finite", int(report.finite))
                ctx.row("integrability", label, "value", report.value)
                if abs(report.kappa - base.nu / (2.0 * k)) > 0.02:
                    ctx.check(f"integrability verdict {label}", report.finite == params.convergent)


# ---- renormalize ----


def _first_block(values: np.ndarray, N: int, nu: int) -> np.ndarray:
    window = (slice(None),) + (slice(0, N),) * nu
    return values[window].reshape(values.shape[0], -1).sum(axis=1)


@register_suite("renormalize")
def renormalize_suite(ctx: SuiteContext) -> None:
    cfg = ctx.config
    section = cfg.renormalize
    model = cfg.model.to_model()
    H = section.expansion()
    k = H.rank
    regime = section.regime
    ctx.row("setup", "hermite", "rank", k)
    ctx.row("setup", "hermite", "second_moment", H.second_moment)

    with ctx.step("exact variance"):
        exact: Dict[int, float] = {}
        for N in sorted(set(section.exact_N) | set(section.N)):
            A = fields.norming(model, N, regime, k)
            exact[N] = fields.variance_exact(model, H, N, A)
            ctx.row("exact", f"N={N}", "norming", A)
            ctx.row("exact", f"N={N}", "variance", exact[N])
            ctx.row("exact", f"N={N}", "cov_neighbour",
                    fields.block_covariance_exact(model, H, N, (1,) + (0,) * (model.nu - 1), A))
        grid = [exact[N] for N in section.exact_N]
        if regime == "noncentral":
            spread = max(grid) / min(grid)
            ctx.row("exact", "N grid", "max_over_min", spread)
            ctx.check("E(Z_0^N)^2 bounded away from 0 and infinity", spread < 1.5, f"max/min {spread:.4f}")
        else:
            sigma2 = fields.sigma_total(H, model)
            ctx.row("limit", "sigma^2", "value", sigma2)
            for l in H.nonzero_orders():
                lim = fields.sigma_limit(model, l, section.exact_N)
                ctx.row("limit", f"l={l}", "l!sigma_l^2", lim.lattice)
                ctx.row("limit", f"l={l}", "extrapolated", lim.extrapolated)
                ctx.row("limit", f"l={l}", "increment_ratio", lim.increment_ratio)
            gap = abs(grid[-1] - sigma2) / sigma2
            ctx.check("exact block variance near sigma^2", gap < 0.05, f"rel gap {gap:.4f}")

    with ctx.step("simulate"):
        box = (cfg.field_box,) * model.nu
        sample = fields.simulate_field(
            model, box, cfg.seed, section.method,
            replicates=cfg.replicates, workers=cfg.workers, block=cfg.block,
        )
        xi = fields.subordinate(sample, H)
        ctx.row("setup", "field", "method", sample.method)

    with ctx.step("field correlation"):
        lags = [n for n in FIELD_LAGS if n < cfg.field_box]
        for cmp in fields.empirical_correlation(sample, lags):
            ctx.row("field", cmp.label, "mc", cmp.mc)
            ctx.row("field", cmp.label, "se", cmp.se)
            ctx.row("field", cmp.label, "model", cmp.expected)
            name = "sample variance is 1" if cmp.label == "n=0" else f"field correlation matches r(n) ({cmp.label})"
            ctx.check(name, cmp.passed(SE_THRESHOLD),
                      f"{cmp.mc:.5f} vs {cmp.expected:.5f} (se {cmp.se:.3g})")

    with ctx.step("block stationarity"):
        for N in section.N:
            if cfg.field_box // N < 2:
                continue
            report = fields.block_stationarity(fields.renormalize(xi, N, regime, k))
            ctx.row("stationarity", f"N={N}", "blocks", len(report.reports))
            ctx.row("stationarity", f"N={N}", "max_z", report.max_z)
            ctx.check(f"block moments agree across blocks (N={N})", report.max_z <= SE_THRESHOLD,
                      f"max z {report.max_z:.3f} at {report.worst}")

    with ctx.step("diagnostics"):
        reports = {}
        for N in section.N:
            A = fields.norming(model, N, regime, k)
            Z = _first_block(xi.values, N, model.nu) / A
            report = fields.limit_diagnostics(Z)
            reports[N] = report
            for key, value in report.as_dict().items():
                ctx.row("mc", f"N={N}", key, value)
            ctx.check(f"MC variance matches exact (N={N})",
                      abs(report.variance - exact[N]) <= SE_THRESHOLD * report.variance_se,
                      f"{report.variance:.6g} vs {exact[N]:.6g} (se {report.variance_se:.3g})")
        last = reports[max(section.N)]
        if regime == "noncentral":
            if k == 2:
                ctx.check("noncentral limit is skewed",
                          last.skewness > SE_THRESHOLD * last.skewness_se,
                          f"skewness {last.skewness:.4f} (se {last.skewness_se:.4f})")
            return
        ctx.check("MC variance matches sigma^2", abs(last.variance - sigma2) <= SE_THRESHOLD * last.variance_se,
                  f"{last.variance:.6g} vs {sigma2:.6g}")
        ctx.check("excess kurtosis vanishes",
                  abs(last.excess_kurtosis) <= SE_THRESHOLD * last.excess_kurtosis_se,
                  f"{last.excess_kurtosis:.4f} (se {last.excess_kurtosis_se:.4f})")
        if k == 1:
            ctx.check("skewness vanishes", last.gaussian)
            return
        if H.nonzero_orders() == (k,) and k % 2 == 0:
            skew = [fields.skewness_exact(model, k, N) for N in section.skewness_N]
            for N, s in zip(section.skewness_N, skew):
                ctx.row("exact", f"N={N}", "skewness", s)
            ctx.check("exact skewness decreases in N", all(b < a for a, b in zip(skew, skew[1:])))
            target = fields.skewness_exact(model, k, max(section.N))
            ctx.check("MC skewness matches exact", abs(last.skewness - target) <= SE_THRESHOLD * last.skewness_se,
                      f"{last.skewness:.4f} vs {target:.4f}")


# ---- fbm ----


@register_suite("fbm")
def fbm_suite(ctx: SuiteContext) -> None:
    cfg = ctx.config
    section = cfg.fbm
    for H in section.hurst:
        tag = f"H={H!r}"
        spec = FbmSpec.uniform(H, section.grid, section.horizon)
        with ctx.step(f"identities {tag}"):
            for a in section.scale_factors:
                dev = fbm.check_self_similarity(spec, a)
                ctx.row("identities", f"{tag},a={a!r}", "self_similarity", dev)
                ctx.check(f"self-similarity {tag} a={a}", dev <= 1e-12, f"{dev:.2e}")
            for u in section.shifts:
                dev = fbm.check_stationary_increments(spec, u)
                ctx.row("identities", f"{tag},u={u!r}", "stationary_increments", dev)
                ctx.check(f"stationary increments {tag} u={u}", dev <= 1e-12, f"{dev:.2e}")
            dev = fbm.increment_variance_defect(spec)
            ctx.row("identities", tag, "increment_variance", dev)
            ctx.check(f"E(X(t)-X(s))^2 = |t-s|^2H {tag}", dev <= 1e-12)

        with ctx.step(f"simulate {tag}"):
            paths = fbm.simulate(spec, cfg.seed, section.method,
                                 replicates=cfg.replicates, workers=cfg.workers, block=cfg.block)
            ctx.check(f"X(0) = 0 {tag}", bool(np.all(paths[:, 0] == 0.0)))
            cov = fbm.covariance_check(spec, paths, thin=section.thin)
            ctx.row("covariance", tag, "pairs", cov.pairs)
            ctx.row("covariance", tag, "max_z", cov.max_z)
            ctx.row("covariance", tag, "max_abs_error", cov.max_abs_error)
            ctx.check(f"simulated covariance {tag}", cov.passed(SE_THRESHOLD), f"max z {cov.max_z:.3f}")
            if abs(H - 0.5) < 1e-12:
                corr, se = fbm.increment_correlation(paths)
                ctx.row("covariance", tag, "lag1_increment_corr", corr)
                ctx.check("Brownian increments uncorrelated", abs(corr) <= SE_THRESHOLD * se)

        with ctx.step(f"spectral {tag}"):
            rng = replicate_rng(cfg.seed, "fbm-spectral-pairs", 0)
            pairs = [tuple(p) for p in rng.uniform(0.2, 3.0, size=(section.spectral_pairs, 2))]
            res = fbm.spectral_constant(H, pairs)
            ctx.row("spectral", tag, "constant", res.constant)
            ctx.row("spectral", tag, "oracle", res.oracle)
            ctx.row("spectral", tag, "spread", res.spread)
            ctx.row("spectral", tag, "max_imaginary", res.max_imaginary)
            ctx.check(f"spectral ratio constant {tag}", res.spread < 1e-3, f"spread {res.spread:.2e}")
            ctx.check(f"spectral integrand is even {tag}", res.max_imaginary < 1e-9)
            ctx.check(f"spectral constant matches closed form {tag}", abs(res.constant / res.oracle - 1.0) < 1e-3)


# ---- tails ----


def _upper_x(m: int, quantile: float, lo: float) -> float:
    target = math.log(quantile)
    f = lambda x: tails.tail_exact_log(m, x) - target
    hi = max(2.0 * lo, 2.0)
    while f(hi) > 0.0:
        hi *= 2.0
    if f(lo) <= 0.0:
        return 2.0 * lo
    return float(optimize.brentq(f, lo, hi))


@register_suite("tails")
def tails_suite(ctx: SuiteContext) -> None:
    cfg = ctx.config
    section = cfg.tails
    with ctx.step("polynomials"):
        cases = [
            ("x", {(1,): 1.0}, [[1.0]], (1, 2, 3)),
            ("x^2-1", {(2,): 1.0, (0,): -1.0}, [[1.0]], (2,)),
            ("xy", {(1, 1): 1.0}, [[1.0, 0.0], [0.0, 1.0]], (2,)),
        ]
        for name, poly, cov, Ns in cases:
            for N in Ns:
                res = tails.polynomial_moment_check(poly, cov, N)
                ctx.row("polynomial", f"{name},N={N}", "moment", res.moment)
                ctx.row("polynomial", f"{name},N={N}", "bound", res.bound)
                ctx.check(f"polynomial moment bound {name} N={N}", res.passed)

    for m in section.orders:
        tag = f"m={m}"
        second = float(math.factorial(m))
        with ctx.step(f"moments {tag}"):
            for N in range(1, section.moment_max + 1):
                if m * N > tails.MAX_EXACT_MN:
                    continue
                exact = tails.moment_exact_hermite(m, 2 * N)
                b = tails.moment_bound(m, N, second)
                ctx.row("moments", f"{tag},N={N}", "exact", exact)
                ctx.row("moments", f"{tag},N={N}", "sharp_bound", b.sharp)
                ctx.row("moments", f"{tag},N={N}", "diagram_bound", b.diagram)
                ctx.row("moments", f"{tag},N={N}", "double_factorial_bound", b.double_factorial)
                ctx.check(f"moment chain {tag} N={N}",
                          exact <= b.sharp * (1 + 1e-12) and b.sharp <= b.diagram <= b.double_factorial)
                if m * N <= 6:
                    quad = tails.moment_quadrature_hermite(m, 2 * N)
                    ctx.check(f"exact moment vs quadrature {tag} N={N}", abs(exact - quad) <= 1e-9 * abs(quad))

        with ctx.step(f"constants {tag}"):
            c = tails.tail_constants(m, second)
            ctx.row("constants", tag, "alpha", c.alpha)
            ctx.row("constants", tag, "K2", c.k2)
            ctx.row("constants", tag, "x0", c.x0)
            ctx.check(f"K2 decreases with the second moment {tag}", tails.tail_constants(m, 2 * second).k2 < c.k2)
            system = chaos.uniform_system(1, 8)
            kernel = chaos.random_symmetric_kernel(system, m, replicate_rng(cfg.seed, "tails-kernels", m))
            one = tails.ChaosVariable.from_kernel(kernel)
            two = tails.ChaosVariable.from_kernel(kernel.with_values(2.0 * kernel.values))
            k_one = tails.tail_constants(m, one.second_moment).k2
            k_two = tails.tail_constants(m, two.second_moment).k2
            ctx.check(f"K2 depends on the second moment only {tag}",
                      _rel(two.second_moment, 4.0 * one.second_moment) < 1e-12
                      and abs(k_two / k_one - 4.0 ** (-1.0 / m)) < 1e-12)

        with ctx.step(f"survival {tag}"):
            start = c.x0 * 1.05
            xs = np.linspace(start, _upper_x(m, section.x_max_quantile, start), section.x_points)
            estimate = tails.tail_empirical(m, xs, cfg.replicates, cfg.seed, workers=cfg.workers)
            table = tails.tail_table(m, second, estimate)
            for i, x in enumerate(xs):
                for key in ("empirical", "standard_error", "exact", "bound"):
                    ctx.row("survival", f"{tag},x={float(x)!r}", key, float(table[key][i]))
            slack = table["bound"] + SE_THRESHOLD * table["standard_error"]
            ctx.check(f"empirical survival below bound {tag}", bool(np.all(table["empirical"] <= slack)))
            ctx.check(f"exact survival below bound {tag}", bool(np.all(table["exact"] <= table["bound"])))
            slope = tails.tail_slope(m)
            ctx.row("slope", tag, "exact_slope", slope.slope)
            ctx.row("slope", tag, "expected", slope.expected)
            emp = tails.empirical_slope(estimate)
            ctx.row("slope", tag, "empirical_slope", math.nan if emp is None else emp)
            ctx.check(f"log-survival slope {tag}", slope.within(), f"ratio {slope.ratio:.3f}")


__all__ = [
    "Check",
    "SUITES",
    "SuiteAborted",
    "SuiteContext",
    "SuiteResult",
    "register_suite",
    "run_suite",
]
