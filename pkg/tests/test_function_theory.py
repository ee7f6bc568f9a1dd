import dataclasses
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from services import bergman, function_theory as ft, opmat
from services.function_theory import Classification, FunctionTheoryError
from services.opmat import TruncOp
from services.polalg import BoundaryFunction, NormalPoly
from services.qnum import QContext, q_derivative, q_int


@pytest.fixture(scope="module")
def half_ctx():
    return QContext("1/2", trunc_dim=32)


def _classify(p: NormalPoly) -> Classification:
    return ft.classify(opmat.to_matrix(p, p.ctx), with_diagnostics=False).classification


def test_classification_of_basic_elements(half_ctx):
    z, zbar = NormalPoly.z(half_ctx), NormalPoly.zbar(half_ctx)
    assert _classify(z**3) is Classification.WEAKLY_HOLO
    assert _classify(zbar**2) is Classification.WEAKLY_ANTIHOLO
    assert _classify(z + zbar**2) is Classification.HARMONIC
    assert _classify(zbar * z) is Classification.NONE
    assert _classify(NormalPoly.constant(3, half_ctx)) is Classification.WEAKLY_HOLO


def test_classify_attaches_diagnostics(ctx):
    report = ft.classify(opmat.to_matrix(NormalPoly.monomial(0, 2, ctx), ctx))
    assert report.scalability is not None
    assert report.scalability.certificate == "finite"
    assert report.extracted_symbol.coefficient(2) == pytest.approx(1.0, abs=1e-9)
    assert report.to_dict()["classification"] == "weakly_holo"


def test_weak_harmonicity_needs_margin(half_ctx):
    thin = TruncOp(np.eye(32, dtype=complex), half_ctx, 2)
    with pytest.raises(FunctionTheoryError):
        ft.is_weakly_harmonic(thin)


def test_dirichlet_solution_for_simple_boundaries(half_ctx):
    gens = opmat.build_generators(half_ctx)
    z_solution = ft.dirichlet_solve(BoundaryFunction.from_json({"1": [1, 0]}), half_ctx)
    assert np.array_equal(z_solution.entries, gens.z.entries)
    assert abs(opmat.integral_matrix(z_solution)) < 1e-15

    one = ft.dirichlet_solve(BoundaryFunction.from_json({"0": [1, 0]}), half_ctx)
    assert np.array_equal(one.entries, np.eye(32))

    with pytest.raises(FunctionTheoryError):
        ft.dirichlet_solve(BoundaryFunction.from_json({"17": [1, 0]}), half_ctx)


def test_dirichlet_worked_example(ctx):
    f = BoundaryFunction.from_json({"1": [1, 0], "-2": [1, 0]})
    a = ft.dirichlet_solve(f, ctx)
    assert ft.is_weakly_harmonic(a).flag
    extracted = ft.estimate_symbol(a)
    assert extracted.reliable
    assert extracted.boundary.coefficient(1) == pytest.approx(1.0, abs=1e-9)
    assert extracted.boundary.coefficient(-2) == pytest.approx(1.0, abs=1e-9)
    assert extracted.boundary.coefficient(0) == 0
    assert ft.dirichlet_cross_check(f, ctx.with_dim(32)) < 1e-8


def test_poisson_integral_matches_harmonic_extension(half_ctx):
    f = BoundaryFunction.from_json({"0": [0.5, 0], "2": [0, 1], "-1": [2, 0]})
    zeta = 0.3 - 0.4j
    expected = 0.5 + 1j * zeta**2 + 2 * np.conj(zeta)
    assert ft.poisson_eval(f, zeta, half_ctx) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(FunctionTheoryError):
        ft.poisson_eval(f, 1.0, half_ctx)


def test_harmonic_diagnostics_for_identity(half_ctx):
    f = BoundaryFunction.from_json({"0": [1, 0]})
    report = ft.harmonic_diagnostics(ft.dirichlet_solve(f, half_ctx), f)
    assert report.passed
    assert report.mean_value == pytest.approx(1.0, abs=1e-9)
    assert report.op_norm == pytest.approx(1.0, abs=1e-9)
    assert report.min_eigenvalue == pytest.approx(1.0, abs=1e-6)
    assert report.to_dict()["passed"] is True


def test_harmonic_diagnostics_rejects_non_harmonic(half_ctx):
    a = opmat.to_matrix(NormalPoly.monomial(1, 1, half_ctx), half_ctx)
    with pytest.raises(FunctionTheoryError):
        ft.harmonic_diagnostics(a, BoundaryFunction.from_json({"0": [1, 0]}))


@pytest.mark.parametrize("pole", [0.3, 0.5, 0.8])
def test_poisson_kernel_quantization_is_positive(half_ctx, pole):
    grid = bergman.BergmanGrid.build(half_ctx)
    a = bergman.toeplitz_quantize(ft.poisson_kernel_extension(pole), grid, half_ctx)
    assert opmat.min_eigenvalue(a) >= -1e-10


def test_harnack_sequence_is_monotone_and_cauchy(half_ctx):
    sequence = ft.harnack_sequence(3)
    assert sequence[-1].coefficient(0) == pytest.approx(0.875)
    report = ft.harnack_check(half_ctx, 5)
    assert report.passed
    assert len(report.steps) == 5


def test_q_antiderivative_is_exact(half_ctx):
    for d in range(5):
        k = [0] * d + [1]
        g = ft.q_antiderivative(k, half_ctx)
        y = Fraction(1, 3)
        assert q_derivative(lambda t: ft.evaluate_coefficients(g, t), y, half_ctx) == y**d


def test_weighted_series_matches_closed_form(half_ctx):
    k = [1, 2, 0, -1]
    closed = ft.q_antiderivative(k, half_ctx)
    y = 0.6
    series = ft.antiderivative_series(k, y, half_ctx)
    assert series == pytest.approx(complex(ft.evaluate_coefficients([complex(c) for c in closed], y)), abs=1e-12)


def test_unweighted_series_discrepancy(half_ctx):
    with pytest.raises(FunctionTheoryError):
        ft.antiderivative_series([1], 0.5, half_ctx, weighted=False)
    record = ft.antiderivative_discrepancy(2, half_ctx)
    assert record.predicted_ratio == q_int(3, half_ctx) / q_int(2, half_ctx)
    assert record.measured_ratio == pytest.approx(float(record.predicted_ratio), abs=1e-9)
    assert math.isinf(ft.antiderivative_discrepancy(0, half_ctx).predicted_ratio)


def test_neumann_inverses_and_scalability(ctx):
    gens = opmat.build_generators(ctx)
    inverse_bar = opmat.neumann_inverse(gens.zbar, ctx.q_float, max_terms=ctx.trunc_dim // 2)
    bar_report = ft.classify(inverse_bar)
    assert bar_report.classification is Classification.WEAKLY_ANTIHOLO
    assert bar_report.scalability.scalable

    holo_report = ft.classify(inverse_bar.adjoint())
    assert holo_report.classification is Classification.WEAKLY_HOLO
    assert holo_report.scalability.certificate == "root_test"
    assert not holo_report.scalability.scalable
    assert holo_report.scalability.radius == pytest.approx(1.0, abs=1e-2)


def test_scalability_needs_holomorphic_input(half_ctx):
    with pytest.raises(FunctionTheoryError):
        ft.scalability_diagnostic(opmat.to_matrix(NormalPoly.monomial(1, 1, half_ctx), half_ctx))


def test_boundary_reality(half_ctx):
    assert ft.is_real_boundary(BoundaryFunction.from_json({"1": [1, 2], "-1": [1, -2], "0": [3, 0]}))
    assert not ft.is_real_boundary(BoundaryFunction.from_json({"1": [1, 0]}))


def test_symbol_extraction_reaches_bandwidth_eight():
    ctx = QContext("3/10", trunc_dim=32)
    f = BoundaryFunction.from_json({"8": [1, 0], "-7": [0.5, 0], "0": [1, 0]})
    extracted = ft.estimate_symbol(ft.dirichlet_solve(f, ctx))
    assert extracted.reliable
    assert set(extracted.boundary.fourier) == {8, -7, 0}
    for d in (8, -7, 0):
        assert extracted.boundary.coefficient(d) == pytest.approx(f.coefficient(d), abs=1e-9)


def test_symbol_beyond_reach_is_flagged(half_ctx):
    a = ft.dirichlet_solve(BoundaryFunction.from_json({"9": [1, 0]}), half_ctx)
    narrowed = dataclasses.replace(a, margin=16)
    estimate = ft.estimate_symbol(narrowed)
    assert 9 not in estimate.boundary.fourier
    assert not estimate.reliable


def test_polar_poisson_sampling_matches_pointwise(half_ctx):
    f = BoundaryFunction.from_json({"3": [1, -1], "-2": [0.5, 0], "0": [2, 0]})
    grid = bergman.BergmanGrid.build(half_ctx)
    symbol = ft.poisson_symbol(f, half_ctx)
    fast = bergman.toeplitz_quantize(symbol, grid, half_ctx)
    pointwise = bergman.toeplitz_quantize(dataclasses.replace(symbol, polar=None), grid, half_ctx)
    assert np.max(np.abs(fast.entries - pointwise.entries)) < 1e-12


def test_poisson_sampling_on_the_circle_is_silent(half_ctx):
    f = BoundaryFunction.from_json({"1": [1, 0], "-1": [1, 0]})
    grid = bergman.BergmanGrid.build(half_ctx)
    symbol = ft.poisson_symbol(f, half_ctx)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        values = symbol(grid.nodes(64))
        rows = symbol.sample_grid(grid, 64)
    assert np.all(np.isfinite(values))
    assert np.allclose(values, rows, atol=1e-12)
    assert values[0, 0] == pytest.approx(2.0)


def _report(**overrides):
    fields = dict(
        mean_value=1 + 0j,
        boundary_mean=1 + 0j,
        mean_error=0.0,
        op_norm=1.0,
        boundary_sup=1.0,
        coherent_lower=1.0,
        norm_gap=0.0,
        min_eigenvalue=None,
        boundary_min=None,
    )
    fields.update(overrides)
    return ft.HarmonicReport(**fields)


def test_harmonic_report_gates_on_mean_value_and_norm_bound():
    assert _report().passed
    assert not _report(mean_error=1e-6).passed
    assert _report(mean_error=1e-6, mean_tolerance=1e-5).passed
    above = _report(op_norm=1.2, norm_gap=0.2)
    assert not above.maximum_principle_ok and not above.passed
    below = _report(coherent_lower=1.2)
    assert not below.maximum_principle_ok
    assert _report(min_eigenvalue=-1e-3, boundary_min=0.5).passed is False
