from fractions import Fraction

import numpy as np
import pytest

from services import opmat, polalg
from services.opmat import ConvergenceError, TruncationError, TruncOp
from services.polalg import NormalPoly
from services.qnum import QContext


def test_generators_satisfy_relations_on_interior(sweep_ctx):
    report = opmat.structure_checks(sweep_ctx)
    assert report.relation_residual < 1e-14
    assert report.jz_residual < 1e-14
    assert report.zbarz_residual < 1e-14
    assert report.passed
    assert report.largest_singular_value < 1


def test_exact_generators_satisfy_relations_exactly(small_ctx):
    report = opmat.structure_checks(small_ctx, exact=True)
    assert report.relation_residual == 0
    assert report.jz_residual == 0
    assert report.zbarz_residual == 0


def test_exact_gauge_matches_float_matrices(small_ctx):
    p = NormalPoly({(1, 2): 1, (0, 1): Fraction(1, 3), (2, 0): (0, 1)}, small_ctx)
    exact = opmat.to_matrix(p, small_ctx, exact=True)
    numeric = opmat.to_matrix(p, small_ctx)
    assert exact.margin == numeric.margin == small_ctx.trunc_dim - 3
    assert np.max(np.abs(exact.to_float().interior() - numeric.interior())) < 1e-14


def test_to_matrix_rejects_high_degree(small_ctx):
    with pytest.raises(TruncationError):
        opmat.to_matrix(NormalPoly.monomial(5, 4, small_ctx), small_ctx)


def test_zbar_z_is_one_minus_qj(ctx):
    gens = opmat.build_generators(ctx)
    expected = opmat.identity(ctx) - gens.j.scaled(ctx.q_float)
    assert opmat.interior_residual(opmat.to_matrix(NormalPoly.monomial(1, 1, ctx), ctx), expected) < 1e-14


def test_product_margin_and_context_checks(small_ctx):
    gens = opmat.build_generators(small_ctx)
    assert (gens.z @ gens.zbar).margin == small_ctx.trunc_dim - 2
    other = opmat.build_generators(small_ctx.with_dim(8))
    with pytest.raises(TruncationError):
        gens.z + other.z
    with pytest.raises(TruncationError):
        gens.z + opmat.build_generators(small_ctx, exact=True).z
    with pytest.raises(TruncationError):
        TruncOp(np.zeros((3, 3), dtype=complex), small_ctx, 3)


def test_scale_j_matches_polynomial_j(small_ctx):
    p = NormalPoly({(0, 1): 1, (2, 1): 3}, small_ctx)
    scaled = opmat.scale_J_matrix(opmat.to_matrix(p, small_ctx, exact=True))
    expected = opmat.to_matrix(polalg.scale_J(p), small_ctx, exact=True)
    assert opmat.interior_residual(scaled, expected) == 0
    assert scaled.meta["amplification"] == pytest.approx(2.0)


@pytest.mark.parametrize(
    "terms",
    [{(0, 1): 1}, {(0, 3): 2, (1, 1): -1}, {(2, 1): (1, 1), (1, 0): Fraction(1, 2)}],
)
def test_exact_derivatives_match_polynomial_engine(small_ctx, terms):
    p = NormalPoly(terms, small_ctx)
    a = opmat.to_matrix(p, small_ctx, exact=True)
    for which, derivative in (("partial", polalg.partial), ("barpartial", polalg.barpartial)):
        expected = opmat.to_matrix(derivative(p), small_ctx, exact=True)
        assert opmat.interior_residual(opmat.d_op(a, which), expected) == 0


def test_exact_laplacian_matches_polynomial_engine(small_ctx):
    p = NormalPoly({(2, 2): 1, (1, 2): 3}, small_ctx)
    a = opmat.to_matrix(p, small_ctx, exact=True)
    expected = opmat.to_matrix(polalg.laplacian(p), small_ctx, exact=True)
    assert opmat.interior_residual(opmat.laplacian_matrix(a), expected) == 0


def test_float_derivative_records_amplification(small_ctx):
    result = opmat.d_op(opmat.to_matrix(NormalPoly.z(small_ctx), small_ctx), "partial")
    assert result.meta["amplification"] >= 1
    assert opmat.interior_residual(result, opmat.identity(small_ctx)) < 1e-9


def test_float_laplacian_is_limited_to_small_dimensions(ctx):
    with pytest.raises(TruncationError):
        opmat.laplacian_matrix(opmat.to_matrix(NormalPoly.z(ctx), ctx))


def test_quadratic_form_of_partial_z(small_ctx):
    phi = opmat.StateVector.basis(2, small_ctx)
    value = opmat.quadratic_form(opmat.to_matrix(NormalPoly.z(small_ctx), small_ctx), phi, "partial")
    assert value == pytest.approx(1.0)
    with pytest.raises(TruncationError):
        opmat.quadratic_form(opmat.identity(small_ctx), opmat.StateVector(np.zeros(16), small_ctx), "partial")


def test_weighted_trace_matches_exact_integral(ctx):
    for n in range(6):
        p = NormalPoly.monomial(n, n, ctx)
        a = opmat.to_matrix(p, ctx)
        exact = polalg.integrate(p)
        assert abs(opmat.integral_matrix(a) - complex(exact)) <= 1e-12 + opmat.integral_truncation_bound(a)


def test_exact_weighted_trace_is_rational(small_ctx):
    value = opmat.integral_matrix(opmat.identity(small_ctx, exact=True))
    assert value == 1 - small_ctx.q_exact**small_ctx.trunc_dim


def test_op_norm_and_min_eigenvalue(small_ctx):
    diagonal = np.diag(np.linspace(2.0, -1.0, small_ctx.trunc_dim)).astype(complex)
    a = TruncOp(diagonal, small_ctx, small_ctx.trunc_dim)
    assert opmat.op_norm(a, tol=1e-12) == pytest.approx(2.0, rel=1e-6)
    assert opmat.min_eigenvalue(a, tol=1e-12) == pytest.approx(-1.0, abs=1e-6)
    assert opmat.op_norm(opmat.zeros(small_ctx)) == 0.0
    assert opmat.norm_upper_bound(a) == pytest.approx(2.0)


def test_op_norm_reports_last_iterate(ctx):
    z = opmat.build_generators(ctx).z
    with pytest.raises(ConvergenceError) as excinfo:
        opmat.op_norm(z, max_iter=1)
    assert 0 < excinfo.value.last_iterate <= 1
    assert excinfo.value.iterations == 1


def test_neumann_inverse_of_shift(ctx):
    gens = opmat.build_generators(ctx)
    inverse = opmat.neumann_inverse(gens.z, 0.5)
    step = opmat.identity(ctx) - gens.z.scaled(0.5)
    product = step.entries @ inverse.entries
    size = inverse.margin
    assert size > 0
    assert np.max(np.abs(product[:size, :size] - np.eye(size))) < 1e-12
    assert inverse.meta["tail_bound"] < 1e-10
    with pytest.raises(TruncationError):
        opmat.neumann_inverse(gens.z, 2.0)


def test_adjoint_needs_float_mode(small_ctx):
    exact = opmat.build_generators(small_ctx, exact=True)
    with pytest.raises(TruncationError):
        exact.z.adjoint()
    gens = opmat.build_generators(small_ctx)
    assert np.array_equal(gens.z.adjoint().entries, gens.zbar.entries)


def test_operator_dumps_round_trip(tmp_path, small_ctx):
    a = opmat.to_matrix(NormalPoly({(1, 2): (1, -1)}, small_ctx), small_ctx)
    binary = opmat.load_op_binary(opmat.save_op_binary(a, tmp_path / "a.bin"), small_ctx)
    assert binary.margin == a.margin
    assert np.array_equal(binary.entries, a.entries)

    restored = opmat.load_op_json(opmat.save_op_json(a, tmp_path / "a.json"))
    assert restored.ctx.q_exact == small_ctx.q_exact
    assert np.array_equal(restored.entries, a.entries)

    (tmp_path / "short.bin").write_bytes((tmp_path / "a.bin").read_bytes()[:-16])
    with pytest.raises(TruncationError):
        opmat.load_op_binary(tmp_path / "short.bin", small_ctx)


def test_json_dump_rejects_wrong_entry_count():
    payload = {"q": "1/2", "N": 8, "margin": 8, "entries": [[0.0, 0.0]] * 10}
    with pytest.raises(TruncationError):
        opmat.op_from_json(payload)


def test_generators_keep_exact_rationals():
    gens = opmat.build_generators(QContext("1/3", trunc_dim=8), exact=True)
    assert gens.zbar.entries[0, 1] == Fraction(2, 3)
    assert gens.j.entries[2, 2] == Fraction(1, 9)


@pytest.mark.parametrize("exact", [False, True])
def test_generator_brackets_match_commutators(small_ctx, exact):
    p = NormalPoly({(1, 2): 1, (0, 1): Fraction(1, 3), (3, 0): (0, 1)}, small_ctx)
    a = opmat.to_matrix(p, small_ctx, exact=exact)
    gens = opmat.build_generators(small_ctx, exact=exact)
    for which, generator in (("z", gens.z), ("zbar", gens.zbar)):
        bracket = opmat.generator_bracket(which, a)
        expected = opmat.commutator(generator, a)
        assert bracket.margin == a.margin - 1
        if exact:
            assert np.array_equal(bracket.entries, expected.entries)
        else:
            assert np.max(np.abs(bracket.entries - expected.entries)) < 1e-14


def test_exact_words_are_generator_products(small_ctx):
    gens = opmat.build_generators(small_ctx, exact=True)
    for m, n in ((0, 0), (2, 0), (0, 3), (2, 3), (3, 1)):
        word = opmat.identity(small_ctx, exact=True).entries
        for _ in range(n):
            word = gens.z.entries @ word
        for _ in range(m):
            word = gens.zbar.entries @ word
        matrix = opmat.to_matrix(NormalPoly.monomial(m, n, small_ctx), small_ctx, exact=True)
        assert np.array_equal(matrix.entries, word)


def test_cached_generators_are_read_only(small_ctx):
    gens = opmat.build_generators(small_ctx)
    assert gens is opmat.build_generators(QContext("1/2", trunc_dim=16))
    with pytest.raises(ValueError):
        gens.z.entries[1, 0] = 0


def test_min_eigenvalue_methods(small_ctx):
    diagonal = np.diag(np.linspace(2.0, -1.0, small_ctx.trunc_dim)).astype(complex)
    a = TruncOp(diagonal, small_ctx, small_ctx.trunc_dim)
    assert opmat.min_eigenvalue(a) == pytest.approx(-1.0, abs=1e-12)
    assert opmat.min_eigenvalue(a, method="power", tol=1e-10) == pytest.approx(-1.0, abs=1e-8)
    with pytest.raises(ConvergenceError):
        opmat.min_eigenvalue(a, method="power", tol=1e-10, max_iter=3)
    with pytest.raises(TruncationError):
        opmat.min_eigenvalue(a, method="lanczos")


def test_svd_norm_is_an_upper_bound_for_power_iteration(small_ctx):
    z = opmat.build_generators(small_ctx).z
    exact_norm = opmat.op_norm(z, method="svd")
    assert exact_norm == pytest.approx(np.linalg.norm(z.entries, 2))
    assert opmat.op_norm(z, tol=1e-6) <= exact_norm + 1e-12
    with pytest.raises(TruncationError):
        opmat.op_norm(z, method="frobenius")


def test_amplification_warning_is_logged_once_per_context(caplog):
    ctx = QContext("2/5", trunc_dim=41)
    a = opmat.to_matrix(NormalPoly.monomial(1, 1, ctx), ctx)
    with caplog.at_level("WARNING", logger="services.opmat"):
        first = opmat.d_op(a, "partial")
        second = opmat.d_op(a, "barpartial")
    assert first.meta["amplification_warning"] and second.meta["amplification_warning"]
    records = [record for record in caplog.records if "amplification" in record.getMessage()]
    assert len(records) == 1
