import math
from fractions import Fraction

import pytest

from services.qnum import (
    QContext,
    QContextError,
    QNumError,
    euler_series,
    euler_terms,
    jackson_integral,
    parse_q,
    pochhammer_terms,
    q_derivative,
    q_factorial_product,
    q_int,
    q_pochhammer,
)


def test_parse_q_accepts_exact_rationals():
    assert parse_q("1/2") == Fraction(1, 2)
    assert parse_q(" 9 / 10 ") == Fraction(9, 10)
    assert parse_q(Fraction(3, 10)) == Fraction(3, 10)


@pytest.mark.parametrize("raw", ["0.5", "1/0", "half", ""])
def test_parse_q_rejects_inexact_or_malformed(raw):
    with pytest.raises(QContextError):
        parse_q(raw)


@pytest.mark.parametrize("q", ["0", "1", "3/2", "-1/2"])
def test_context_rejects_q_outside_open_interval(q):
    with pytest.raises(QContextError):
        QContext(q)


def test_context_rejects_tiny_truncation():
    with pytest.raises(QContextError):
        QContext("1/2", trunc_dim=3)


def test_from_config_accepts_plain_dict():
    ctx = QContext.from_config({"Q": "3/10", "DIM": 40, "TOL_IDENTITY": 1e-8})
    assert ctx.q_exact == Fraction(3, 10)
    assert ctx.trunc_dim == 40
    assert ctx.tol_identity == 1e-8
    assert ctx.with_dim(16).trunc_dim == 16


def test_q_integers_and_factorial_products(ctx):
    assert q_int(0, ctx) == 0
    assert q_int(3, ctx) == Fraction(7, 4)
    assert [q_factorial_product(n, ctx) for n in range(4)] == [1, Fraction(1, 2), Fraction(3, 8), Fraction(21, 64)]
    with pytest.raises(QNumError):
        q_int(-1, ctx)


def test_exact_pochhammer_for_rational_argument(ctx):
    assert q_pochhammer(Fraction(1, 2), ctx, 2) == Fraction(1, 2) * Fraction(3, 4)


@pytest.mark.parametrize("x", [0.0, 0.4, -0.3, 0.2 + 0.3j])
def test_euler_series_inverts_pochhammer(sweep_ctx, x):
    series = euler_series(x, sweep_ctx, euler_terms(x, sweep_ctx, 1e-13))
    product = q_pochhammer(x, sweep_ctx, pochhammer_terms(x, sweep_ctx, 1e-13))
    assert abs(series * product - 1) < 1e-12


def test_euler_series_rejects_unit_argument(ctx):
    with pytest.raises(QNumError):
        euler_series(1.0, ctx, 10)


def test_q_derivative_is_exact_on_rationals(ctx):
    y = Fraction(1, 2)
    assert q_derivative(lambda t: t**3, y, ctx) == q_int(3, ctx) * y**2
    with pytest.raises(QNumError):
        q_derivative(lambda t: t, 0, ctx)


def test_jackson_integral_of_square(ctx):
    result = jackson_integral(lambda t: t**2, ctx, 1e-14)
    assert abs(result.value - 4 / 7) < 1e-12
    assert result.tail_bound < 1e-14


def test_jackson_integral_inverts_q_derivative(sweep_ctx):
    def g(t):
        return 3 * t**4 - t + 2

    result = jackson_integral(lambda t: q_derivative(g, t, sweep_ctx), sweep_ctx, 1e-14)
    assert abs(result.value - (g(1.0) - g(0.0))) < 1e-11


def test_jackson_integral_needs_finite_integrand(ctx):
    with pytest.raises(QNumError):
        jackson_integral(lambda t: math.inf, ctx)


@pytest.mark.parametrize("x", [-0.7, -0.85, Fraction(-7, 10), -0.5 + 0.5j])
def test_euler_series_survives_cancellation_near_one(x):
    ctx = QContext("9/10")
    series = euler_series(x, ctx, euler_terms(x, ctx, 1e-15))
    product = q_pochhammer(complex(x), ctx, pochhammer_terms(complex(x), ctx, 1e-15))
    assert abs(series * product - 1) < 1e-12
