"""Identity suites run per (q, N) cell by ``qdisk verify``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from services import bergman, function_theory as ft, opmat, polalg
from services.polalg import BoundaryFunction, NormalPoly
from services.qnum import (
    QContext,
    QNumError,
    euler_series,
    euler_terms,
    jackson_integral,
    pochhammer_terms,
    q_derivative,
    q_factorial_product,
    q_int,
    q_pochhammer,
)

logger = logging.getLogger(__name__)

EXACT_DIM = 24
RANDOM_BOUNDARY_COUNT = 50
# the maximum-principle gap is measured at this N whatever the cell's N
GAP_DIM = 256
GAP_SAMPLES = 2


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    status: CheckStatus
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "name": self.name,
            "status": self.status.value,
            "value": self.value,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class CellReport:
    q: str
    dim: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.status is not CheckStatus.FAIL for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if check.status is CheckStatus.FAIL]

    def counts(self) -> Dict[str, int]:
        counts = {status.value: 0 for status in CheckStatus}
        for check in self.checks:
            counts[check.status.value] += 1
        return counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "N": self.dim,
            "passed": self.passed,
            "counts": self.counts(),
            "checks": [check.to_dict() for check in self.checks],
        }


class _Suite:
    """Collects check results for one module."""

    def __init__(self, name: str):
        self.name = name
        self.results: List[CheckResult] = []

    def within(self, check: str, value: float, tolerance: float, detail: str = "") -> None:
        value = float(value)
        ok = math.isfinite(value) and value <= tolerance
        self._add(check, CheckStatus.PASS if ok else CheckStatus.FAIL, value, tolerance, detail)

    def exact(self, check: str, ok: bool, detail: str = "") -> None:
        self._add(check, CheckStatus.PASS if ok else CheckStatus.FAIL, 0.0 if ok else 1.0, 0.0, detail)

    def skip(self, check: str, detail: str) -> None:
        self._add(check, CheckStatus.SKIP, math.nan, math.nan, detail)

    def _add(self, check: str, status: CheckStatus, value: float, tolerance: float, detail: str) -> None:
        if status is CheckStatus.FAIL:
            logger.warning("%s/%s failed: value %.3g tolerance %.3g %s", self.name, check, value, tolerance, detail)
        else:
            logger.debug("%s/%s %s (%.3g)", self.name, check, status.value, value)
        self.results.append(CheckResult(self.name, check, status, value, tolerance, detail))


def _random_boundary(rng: np.random.Generator, bandwidth: int) -> BoundaryFunction:
    width = int(rng.integers(0, bandwidth + 1))
    fourier = {}
    for d in range(-width, width + 1):
        fourier[d] = complex(rng.normal(), rng.normal()) / (1 + abs(d))
    return BoundaryFunction(fourier=fourier)


# ----- qnum -----
def qnum_suite(ctx: QContext, rng: np.random.Generator) -> List[CheckResult]:
    suite = _Suite("qnum")
    q = ctx.q_exact
    suite.exact("q_int_geometric", all(q_int(n, ctx) == sum(q**k for k in range(n)) for n in range(11)))

    for x in (0.5, -0.5, complex(0.3, 0.4), 0.9):
        product = q_pochhammer(x, ctx, pochhammer_terms(x, ctx, 1e-15))
        series = euler_series(x, ctx, euler_terms(x, ctx, 1e-15))
        suite.within(f"euler_pochhammer_{x}", abs(complex(series) * complex(product) - 1), 1e-12)

    for sample in range(3):
        degree = int(rng.integers(0, 7))
        coefficients = [float(value) for value in rng.integers(-4, 5, size=degree + 1)]
        antiderivative = lambda y, c=coefficients: ft.evaluate_coefficients(c, y)  # noqa: E731
        derivative = lambda y, g=antiderivative: q_derivative(g, y, ctx)  # noqa: E731
        result = jackson_integral(derivative, ctx, tail_tol=1e-14)
        expected = antiderivative(1.0) - antiderivative(0.0)
        suite.within(f"jackson_fundamental_{sample}", abs(result.value - expected), 1e-12, f"degree {degree}")
    return suite.results


# ----- polalg -----
def polalg_suite(ctx: QContext, rng: np.random.Generator) -> List[CheckResult]:
    suite = _Suite("polalg")
    z, zbar = NormalPoly.z(ctx), NormalPoly.zbar(ctx)
    one = NormalPoly.constant(1, ctx)
    zero = NormalPoly.zero(ctx)
    suite.exact(
        "derivative_axioms",
        polalg.partial(z) == one
        and polalg.partial(zbar) == zero
        and polalg.barpartial(zbar) == one
        and polalg.barpartial(z) == zero,
    )

    green_ok = integral_ok = laplacian_ok = True
    for m in range(7):
        for n in range(7):
            p = NormalPoly.monomial(m, n, ctx)
            expected = 1 / q_int(n + 1, ctx) if m == n else 0
            integral_ok &= polalg.integrate(p) == expected
            if m <= 5 and n <= 5:
                check = polalg.green_check(p)
                green_ok &= check.passed and check.lhs == (1 if m == n + 1 else 0)
                laplacian_ok &= polalg.laplacian(p, "dbar_d") == polalg.laplacian(p, "d_dbar") * ctx.q_exact
    suite.exact("green_theorem_monomials", green_ok)
    suite.exact("diagonal_integrals", integral_ok)
    suite.exact("laplacian_q_commutation", laplacian_ok)

    leibniz_ok = True
    for _ in range(100):
        a = polalg.random_poly(rng, ctx, 3)
        b = polalg.random_poly(rng, ctx, 3)
        product = a * b
        leibniz_ok &= polalg.partial(product) == polalg.partial(a) * b + polalg.scale_J(a) * polalg.partial(b)
        leibniz_ok &= polalg.barpartial(product) == polalg.barpartial(a) * b + polalg.scale_J(a) * polalg.barpartial(b)
    suite.exact("twisted_leibniz", leibniz_ok)

    algebra_ok = True
    for _ in range(20):
        a, b, c = (polalg.random_poly(rng, ctx, 2) for _ in range(3))
        algebra_ok &= (a * b) * c == a * (b * c)
        algebra_ok &= polalg.adjoint(a * b) == polalg.adjoint(b) * polalg.adjoint(a)
        algebra_ok &= polalg.integrate(a * b) == polalg.integrate(polalg.scale_J(b) * a)
    suite.exact("associativity_adjoint_trace", algebra_ok)
    return suite.results


# ----- opmat -----
def opmat_suite(ctx: QContext, rng: np.random.Generator) -> List[CheckResult]:
    suite = _Suite("opmat")
    report = opmat.structure_checks(ctx)
    suite.within("defining_relation_float", report.relation_residual, 1e-14)
    suite.within("z_zbar_relation", report.jz_residual, 1e-14)
    suite.within("zbar_z_relation", report.zbarz_residual, 1e-14)
    largest = 1 - math.sqrt(1 - ctx.q_float)
    suite.within("shift_difference_top_singular_value", abs(report.largest_singular_value - largest), 1e-14)
    suite.exact("shift_difference_decay", report.singular_values_decreasing)

    exact_ctx = ctx.with_dim(min(ctx.trunc_dim, EXACT_DIM))
    exact_report = opmat.structure_checks(exact_ctx, exact=True)
    suite.exact("defining_relation_exact", exact_report.relation_residual == 0.0)

    scale_residual = derivative_residual = laplacian_residual = 0.0
    amplification = 1.0
    for _ in range(5):
        p = polalg.random_poly(rng, ctx, 3)
        a = opmat.to_matrix(p, ctx)
        scale_residual = max(scale_residual, opmat.interior_residual(opmat.scale_J_matrix(a), opmat.to_matrix(polalg.scale_J(p), ctx)))

        exact = opmat.to_matrix(p, exact_ctx, exact=True)
        for which, oracle in (("partial", polalg.partial), ("barpartial", polalg.barpartial)):
            derived = opmat.d_op(exact, which)
            amplification = max(amplification, derived.meta["amplification"])
            derivative_residual = max(
                derivative_residual, opmat.interior_residual(derived, opmat.to_matrix(oracle(p), exact_ctx, exact=True))
            )
        dbar_d = opmat.laplacian_matrix(exact, "dbar_d")
        d_dbar = opmat.laplacian_matrix(exact, "d_dbar")
        laplacian_residual = max(
            laplacian_residual,
            opmat.interior_residual(dbar_d, d_dbar.scaled(ctx.q_exact)),
            opmat.interior_residual(dbar_d, opmat.to_matrix(polalg.laplacian(p), exact_ctx, exact=True)),
        )
    suite.within("scale_J_oracle", scale_residual, 1e-10)
    suite.exact("derivative_oracle_exact", derivative_residual == 0.0, f"amplification {amplification:.3g}")
    suite.exact("laplacian_oracle_exact", laplacian_residual == 0.0)

    for n in range(7):
        a = opmat.to_matrix(NormalPoly.monomial(n, n, ctx), ctx)
        error = abs(opmat.integral_matrix(a) - float(1 / q_int(n + 1, ctx)))
        suite.within(f"weighted_trace_{n}", error, opmat.integral_truncation_bound(a) + 1e-12)

    gap = bound = 0.0
    for _ in range(5):
        a = opmat.to_matrix(polalg.random_poly(rng, ctx, 3), ctx)
        b = opmat.to_matrix(polalg.random_poly(rng, ctx, 3), ctx)
        left, right = a @ b, opmat.scale_J_matrix(b) @ a
        gap = max(gap, abs(opmat.integral_matrix(left) - opmat.integral_matrix(right)))
        bound = max(bound, opmat.integral_truncation_bound(left) + opmat.integral_truncation_bound(right))
    suite.within("trace_property", gap, 1e-10 + bound)

    gens = opmat.build_generators(ctx)
    deficit = ctx.q_float ** (ctx.trunc_dim - 1)
    suite.within("norm_of_z", abs(opmat.op_norm(gens.z) - 1), 1e-4 + deficit, f"truncation deficit {deficit:.2g}")
    suite.within("norm_of_identity", abs(opmat.op_norm(opmat.identity(ctx)) - 1), 1e-12)
    suite.within("norm_of_j", abs(opmat.op_norm(gens.j) - 1), 1e-9)
    return suite.results


# ----- bergman -----
def bergman_suite(ctx: QContext, rng: np.random.Generator, grid: bergman.BergmanGrid) -> List[CheckResult]:
    suite = _Suite("bergman")
    suite.within("grid_mass", abs(grid.total_mass - 1), 1e-12)
    gram = bergman.gram_matrix(grid, 13)
    suite.within("gram_identity", float(np.max(np.abs(gram - np.eye(13)))), 1e-10)
    moment_error = max(abs(bergman.moment(n, grid) - float(q_factorial_product(n, ctx))) for n in range(11))
    suite.within("moments", moment_error, 1e-10)

    kernel_error = 0.0
    for x in (0.0, 0.5, -0.7, complex(0.3, 0.6), 0.9):
        product = bergman.kernel_eval(x, 1.0, ctx)
        series = bergman.kernel_series(x, 1.0, ctx)
        kernel_error = max(kernel_error, abs(product - series) / abs(product))
    suite.within("kernel_product_vs_series", kernel_error, 1e-12)

    gens = opmat.build_generators(ctx)
    t_zeta = bergman.toeplitz_quantize(NormalPoly.z(ctx), grid, ctx)
    suite.within("toeplitz_of_zeta", opmat.interior_residual(t_zeta, gens.z), 1e-10)

    density = 0.0
    for m in range(5):
        for n in range(5):
            monomial = NormalPoly.monomial(m, n, ctx)
            quantized = bergman.toeplitz_quantize(monomial, grid, ctx)
            density = max(density, opmat.interior_residual(quantized, opmat.to_matrix(monomial, ctx)))
    suite.within("toeplitz_density_monomials", density, 1e-9)

    expectation_error = expectation_tol = 0.0
    for _ in range(3):
        degree = int(rng.integers(1, 6))
        coefficients = [Fraction(int(value), 2) for value in rng.integers(-4, 5, size=degree + 1)]
        p = polalg.from_holomorphic(coefficients, ctx)
        a = opmat.to_matrix(p, ctx)
        sup = sum(abs(float(value)) for value in coefficients)
        for radius in (0.0, 0.45, min(0.9, ctx.coherent_radius)):
            eta = radius * np.exp(2j * np.pi * float(rng.random()))
            value = bergman.expectation(a, bergman.coherent_state(eta, ctx))
            expectation_error = max(expectation_error, abs(value - polalg.evaluate_classical(p, eta)))
            expectation_tol = max(expectation_tol, 1e-7 + 4 * sup * bergman.coherent_tail(eta, ctx))
    suite.within("coherent_expectation", expectation_error, expectation_tol)
    return suite.results


# ----- function theory -----
def _expected_class(m: int, n: int) -> ft.Classification:
    if m == 0:
        return ft.Classification.WEAKLY_HOLO
    if n == 0:
        return ft.Classification.WEAKLY_ANTIHOLO
    return ft.Classification.NONE


def function_theory_suite(
    ctx: QContext,
    rng: np.random.Generator,
    grid: bergman.BergmanGrid,
    *,
    boundary_count: int = RANDOM_BOUNDARY_COUNT,
) -> List[CheckResult]:
    suite = _Suite("function_theory")
    mismatches = [
        (m, n)
        for m in range(6)
        for n in range(6)
        if ft.classify(opmat.to_matrix(NormalPoly.monomial(m, n, ctx), ctx), with_diagnostics=False).classification
        is not _expected_class(m, n)
    ]
    suite.exact("classify_monomials", not mismatches, f"mismatches {mismatches}")

    bandwidth = min(8, ctx.trunc_dim // 2)
    depth = ft.symbol_depth(ctx.trunc_dim, bandwidth)
    symbol_converged = ctx.q_float**depth / (1 - ctx.q_float) < 1e-8
    mean_gap = mean_tol = symbol_gap = resolve_gap = 0.0
    samples = [_random_boundary(rng, bandwidth) for _ in range(boundary_count)]
    for f in samples:
        a = ft.dirichlet_solve(f, ctx)
        mean_gap = max(mean_gap, abs(complex(opmat.integral_matrix(a)) - f.coefficient(0)))
        mean_tol = max(mean_tol, 1e-10 + opmat.integral_truncation_bound(a))
        if symbol_converged:
            extracted = ft.symbol_extract(a)
            symbol_gap = max(symbol_gap, max(abs(extracted.coefficient(d) - f.coefficient(d)) for d in range(-bandwidth, bandwidth + 1)))
            resolve_gap = max(resolve_gap, opmat.interior_residual(ft.dirichlet_solve(extracted, ctx), a))
    suite.within("dirichlet_mean_value", mean_gap, mean_tol)
    if symbol_converged:
        suite.within("dirichlet_symbol_roundtrip", symbol_gap, 1e-6)
        suite.within("dirichlet_uniqueness", resolve_gap, 1e-6)
    else:
        reason = f"diagonal entries not yet Toeplitz at depth {depth} (q^depth={ctx.q_float ** depth:.2g})"
        suite.skip("dirichlet_symbol_roundtrip", reason)
        suite.skip("dirichlet_uniqueness", reason)

    route_gap = max(ft.dirichlet_cross_check(f, ctx, grid) for f in samples[:2])
    suite.within("dirichlet_fourier_vs_poisson", route_gap, 1e-8)

    sandwich_ok = True
    for f in samples[:5]:
        a = ft.dirichlet_solve(f, ctx)
        sup = float(np.max(np.abs(ft.boundary_samples(f))))
        norm = opmat.op_norm(a, tol=1e-6)
        lower = bergman.coherent_sup(a, ctx)
        sandwich_ok &= lower <= norm * (1 + 1e-3) + 1e-9 and norm <= sup * (1 + 1e-3) + 1e-9
    suite.exact("maximum_principle_sandwich", sandwich_ok)

    gap_ctx = ctx.with_dim(max(ctx.trunc_dim, GAP_DIM))
    gap = 0.0
    for f in samples[:GAP_SAMPLES]:
        sup = float(np.max(np.abs(ft.boundary_samples(f))))
        norm = opmat.op_norm(ft.dirichlet_solve(f, gap_ctx), method="svd")
        gap = max(gap, abs(norm - sup) / sup if sup > 0 else norm)
    suite.within("maximum_principle_gap", gap, 1e-2, f"measured at N={gap_ctx.trunc_dim}")

    lowest = math.inf
    for pole in (0.3, 0.5, 0.8):
        a = bergman.toeplitz_quantize(ft.poisson_kernel_extension(pole), grid, ctx)
        lowest = min(lowest, opmat.min_eigenvalue(a))
    suite.within("poisson_kernel_positivity", -lowest, 1e-10, f"min eigenvalue {lowest:.3g}")

    harnack = ft.harnack_check(ctx, min(10, ctx.trunc_dim // 2 - 1))
    suite.exact("harnack_monotone_cauchy", harnack.passed)

    exact_ctx = ctx.with_dim(min(ctx.trunc_dim, EXACT_DIM))
    antiderivative_ok = True
    roundtrip = 0.0
    for d in range(7):
        k = [0] * d + [1]
        g = ft.q_antiderivative(k, ctx)
        for y in (Fraction(1, 4), Fraction(1, 2), Fraction(1)):
            value = q_derivative(lambda t: ft.evaluate_coefficients(g, t), y, ctx)
            antiderivative_ok &= value == y**d
        if len(g) - 1 <= exact_ctx.trunc_dim // 2:
            t_g = opmat.to_matrix(polalg.from_holomorphic(g, exact_ctx, antiholomorphic=True), exact_ctx, exact=True)
            t_k = opmat.to_matrix(polalg.from_holomorphic(k, exact_ctx, antiholomorphic=True), exact_ctx, exact=True)
            roundtrip = max(roundtrip, opmat.interior_residual(opmat.d_op(t_g, "barpartial"), t_k))
    suite.exact("antiderivative_exact", antiderivative_ok)
    suite.within("antiderivative_roundtrip", roundtrip, 1e-9)
    record = ft.antiderivative_discrepancy(1, ctx)
    suite.within(
        "unweighted_series_discrepancy",
        abs(record.measured_ratio - float(record.predicted_ratio)),
        1e-9,
        f"unweighted series gives [2]_q/[1]_q = {record.predicted_ratio} times k",
    )

    gens = opmat.build_generators(ctx)
    max_terms = ctx.trunc_dim // 2
    inverse_bar = opmat.neumann_inverse(gens.zbar, ctx.q_float, max_terms=max_terms)
    inverse = inverse_bar.adjoint()
    bar_record = ft.classify(inverse_bar).scalability
    holo_record = ft.classify(inverse).scalability
    suite.exact("neumann_antiholomorphic_scalable", bar_record is not None and bar_record.scalable)
    suite.exact(
        "neumann_holomorphic_not_scalable",
        holo_record is not None and not holo_record.scalable,
        f"root-test radius {None if holo_record is None else holo_record.radius}",
    )
    cube = ft.scalability_diagnostic(opmat.to_matrix(NormalPoly.monomial(0, 3, ctx), ctx))
    suite.exact("polynomial_scalable", cube.scalable and cube.certificate == "finite")
    return suite.results


SUITES = ("qnum", "polalg", "opmat", "bergman", "function_theory")
SUITE_ERRORS = (
    opmat.TruncationError,
    opmat.ConvergenceError,
    bergman.QuadratureError,
    ft.FunctionTheoryError,
    polalg.PolynomialError,
    QNumError,
)


def cell_rng(seed: int, ctx: QContext) -> np.random.Generator:
    q = ctx.q_exact
    return np.random.default_rng([seed, q.numerator, q.denominator, ctx.trunc_dim])


def run_cell(
    ctx: QContext,
    *,
    suites: Optional[Sequence[str]] = None,
    seed: int = 0,
    boundary_count: int = RANDOM_BOUNDARY_COUNT,
) -> CellReport:
    """Run the selected suites for one (q, N) pair."""
    selected = list(suites or SUITES)
    unknown = [name for name in selected if name not in SUITES]
    if unknown:
        raise ValueError(f"Unknown suites {unknown}; choose from {list(SUITES)}.")

    logger.info("Verifying %s (%s)", ctx.label, ", ".join(selected))
    rng = cell_rng(seed, ctx)
    report = CellReport(q=str(ctx.q_exact), dim=ctx.trunc_dim)
    grid = bergman.BergmanGrid.build(ctx) if {"bergman", "function_theory"} & set(selected) else None
    runners: Dict[str, Callable[[], List[CheckResult]]] = {
        "qnum": lambda: qnum_suite(ctx, rng),
        "polalg": lambda: polalg_suite(ctx, rng),
        "opmat": lambda: opmat_suite(ctx, rng),
        "bergman": lambda: bergman_suite(ctx, rng, grid),
        "function_theory": lambda: function_theory_suite(ctx, rng, grid, boundary_count=boundary_count),
    }
    for name in SUITES:
        if name not in selected:
            continue
        try:
            report.checks.extend(runners[name]())
        except SUITE_ERRORS as exc:
            logger.error("%s suite aborted at %s: %s", name, ctx.label, exc)
            report.checks.append(CheckResult(name, "suite_error", CheckStatus.FAIL, math.nan, math.nan, str(exc)))
    logger.info("%s: %s", ctx.label, report.counts())
    return report


def run_sweep(
    contexts: Iterable[QContext],
    *,
    suites: Optional[Sequence[str]] = None,
    seed: int = 0,
    boundary_count: int = RANDOM_BOUNDARY_COUNT,
) -> List[CellReport]:
    return [run_cell(ctx, suites=suites, seed=seed, boundary_count=boundary_count) for ctx in contexts]
