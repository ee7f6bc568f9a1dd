"""Scalar q-arithmetic shared by every engine."""

from __future__ import annotations

import cmath
import logging
import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable, Dict, Union

from mpmath import mp

from config import Config

logger = logging.getLogger(__name__)

Number = Union[int, float, complex, Fraction]

_RATIONAL_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")

# significant digits kept by euler_series on top of the cancellation guard
EULER_DIGITS = 30


class QContextError(ValueError):
    """Raised when a deformation context is invalid."""


class QNumError(RuntimeError):
    """Raised when a scalar q-operation cannot be evaluated."""


def parse_q(value: Union[str, int, Fraction]) -> Fraction:
    """Parse q from an exact "a/b" string, integer or Fraction.

    Decimal strings are rejected so the exact engine never sees a rounded q.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise QContextError("q must be a rational number, not a boolean.")
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str):
        raise QContextError(f"q must be given as an exact rational string, got {type(value).__name__}.")
    match = _RATIONAL_PATTERN.match(value)
    if match is None:
        raise QContextError(f"q must look like 'a/b' (decimals are rejected), got {value!r}.")
    numerator = int(match.group(1))
    denominator = int(match.group(2) or 1)
    if denominator == 0:
        raise QContextError("q has a zero denominator.")
    return Fraction(numerator, denominator)


@dataclass(frozen=True)
class QContext:
    """Deformation parameter, truncation dimension and tolerance profile."""

    q_exact: Fraction
    trunc_dim: int = 64
    tol_identity: float = 1e-9
    tol_quadrature: float = 1e-12
    tol_norm: float = 1e-9
    angular_nodes: int = 256
    poisson_nodes: int = 1024
    degree_cap: int = 64
    power_max_iter: int = 200000
    coherent_radius: float = 0.95

    def __post_init__(self) -> None:
        q = parse_q(self.q_exact)
        object.__setattr__(self, "q_exact", q)
        if q == 0:
            raise QContextError("q=0 (the Toeplitz algebra) is not supported; the scaling calculus needs q>0.")
        if q == 1:
            raise QContextError("q=1 (the commutative disk) is not supported; q must lie strictly below 1.")
        if not 0 < q < 1:
            raise QContextError(f"q must lie in the open interval (0, 1), got {q}.")
        if self.trunc_dim < 4:
            raise QContextError(f"Truncation dimension must be at least 4, got {self.trunc_dim}.")
        for name in ("tol_identity", "tol_quadrature", "tol_norm"):
            if getattr(self, name) < 0:
                raise QContextError(f"{name} must be nonnegative.")

    @property
    def q_float(self) -> float:
        return float(self.q_exact)

    @property
    def label(self) -> str:
        return f"q={self.q_exact} N={self.trunc_dim}"

    def with_dim(self, trunc_dim: int) -> "QContext":
        return replace(self, trunc_dim=trunc_dim)

    @classmethod
    def from_config(
        cls,
        config: Union[type[Config], Config, Dict[str, Any]] = Config,
        *,
        q: Union[str, Fraction, None] = None,
        dim: int | None = None,
    ) -> "QContext":
        """Build a context from the Config class or a plain dict of the same keys."""

        def value(name: str, default: Any) -> Any:
            if isinstance(config, dict):
                return config.get(name, default)
            return getattr(config, name, default)

        return cls(
            q_exact=parse_q(q if q is not None else value("Q", "1/2")),
            trunc_dim=int(dim if dim is not None else value("DIM", 64)),
            tol_identity=float(value("TOL_IDENTITY", 1e-9)),
            tol_quadrature=float(value("TOL_QUADRATURE", 1e-12)),
            tol_norm=float(value("TOL_NORM", 1e-9)),
            angular_nodes=int(value("ANGULAR_NODES", 256)),
            poisson_nodes=int(value("POISSON_NODES", 1024)),
            degree_cap=int(value("DEGREE_CAP", 64)),
            power_max_iter=int(value("POWER_MAX_ITER", 200000)),
            coherent_radius=float(value("COHERENT_RADIUS", 0.95)),
        )


def q_int(n: int, ctx: QContext) -> Fraction:
    """Return [n]_q = (1 - q^n) / (1 - q) exactly."""
    if n < 0:
        raise QNumError(f"q-integers are defined for n >= 0, got {n}.")
    q = ctx.q_exact
    return (1 - q**n) / (1 - q)


def q_factorial_product(n: int, ctx: QContext) -> Fraction:
    """Return prod_{i=0}^{n-1} (1 - q^{i+1}), the squared norm of zeta^n."""
    q = ctx.q_exact
    result = Fraction(1)
    for i in range(n):
        result *= 1 - q ** (i + 1)
    return result


def q_pochhammer(x: Number, ctx: QContext, terms: int) -> Number:
    """Partial product prod_{i=0}^{terms-1} (1 - x q^i).

    Rational ``x`` gives an exact Fraction; anything else is evaluated in floating point.
    """
    if terms < 1:
        raise QNumError("q_pochhammer needs at least one factor.")
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        q_exact = ctx.q_exact
        exact = Fraction(1)
        for i in range(terms):
            exact *= 1 - Fraction(x) * q_exact**i
        return exact

    q = ctx.q_float
    result = complex(1.0)
    factor = complex(x)
    for _ in range(terms):
        result *= 1 - factor
        factor *= q
    return result if isinstance(x, complex) else result.real


def pochhammer_tail_bound(x: Number, ctx: QContext, terms: int) -> float:
    """Relative error bound of the partial product against the infinite one (|x| <= 1)."""
    q = ctx.q_float
    head = abs(complex(x)) * q**terms
    if head >= 1:
        return math.inf
    log_bound = head / ((1 - q) * (1 - head))
    return math.expm1(log_bound)


def pochhammer_terms(x: Number, ctx: QContext, tol: float) -> int:
    """Smallest factor count whose tail bound is below ``tol``."""
    terms = 1
    while pochhammer_tail_bound(x, ctx, terms) >= tol:
        terms += 1
        if terms > 100000:
            raise QNumError(f"Pochhammer tail for x={x} does not reach {tol:g}.")
    return terms


def _q_factorial_floor(q: float) -> float:
    """(q; q)_inf in floating point, a lower bound for every (q; q)_m."""
    floor = 1.0
    for i in range(1, 10000):
        floor *= 1 - q**i
        if q**i < 1e-17:
            break
    return floor


def euler_series(x: Number, ctx: QContext, terms: int) -> complex | float:
    """Partial sum 1 + sum_{m>=1} x^m / prod_{k<=m} (1 - q^k) with ``terms`` summands.

    Summands reach |x|^m / (q; q)_inf before they decay, so for Re x < 0 the sum
    cancels by that factor; it is accumulated in mpmath with enough guard digits
    to absorb it and rounded once at the end.
    """
    if abs(complex(x)) >= 1:
        raise QNumError(f"Euler series needs |x| < 1, got |x|={abs(complex(x)):.6g}.")
    if terms < 1:
        raise QNumError("euler_series needs at least one summand.")
    q_exact = ctx.q_exact
    guard = int(math.ceil(-math.log10(_q_factorial_floor(ctx.q_float))))
    with mp.workdps(EULER_DIGITS + guard):
        q = mp.mpf(q_exact.numerator) / q_exact.denominator
        if isinstance(x, Fraction):
            argument = mp.mpf(x.numerator) / x.denominator
        else:
            argument = mp.mpc(complex(x).real, complex(x).imag)
        total = mp.mpf(1)
        summand = mp.mpf(1)
        power = mp.mpf(1)
        for m in range(1, terms):
            power *= q
            summand *= argument / (1 - power)
            total += summand
        value = complex(total)
    return value if isinstance(x, complex) else value.real


def euler_terms(x: Number, ctx: QContext, tol: float) -> int:
    """Summand count after which the geometric tail of the Euler series is below ``tol``."""
    radius = abs(complex(x))
    if radius >= 1:
        raise QNumError("Euler series diverges for |x| >= 1.")
    if radius == 0:
        return 1
    # Summands are bounded by radius^m / (q;q)_inf.
    bound = tol * _q_factorial_floor(ctx.q_float) * (1 - radius)
    return max(1, int(math.ceil(math.log(bound) / math.log(radius))) + 1)


def q_derivative(g: Callable[[Number], Number], y: Number, ctx: QContext) -> Number:
    """Return (g(y) - g(qy)) / ((1 - q) y); exact when y and g are rational."""
    if y == 0:
        raise QNumError("The q-derivative is undefined at y=0.")
    q: Number = ctx.q_exact if isinstance(y, (int, Fraction)) else ctx.q_float
    return (g(y) - g(q * y)) / ((1 - q) * y)


@dataclass(frozen=True)
class JacksonResult:
    """Truncated Jackson integral with the number of nodes used and its tail bound."""

    value: complex | float
    terms: int
    tail_bound: float


def jackson_integral(
    g: Callable[[float], Number],
    ctx: QContext,
    tail_tol: float | None = None,
    *,
    sup_bound: float | None = None,
    sample_nodes: int = 64,
) -> JacksonResult:
    """Evaluate (1 - q) sum_k q^k g(q^k), truncated once sup|g| q^{K+1} < tail_tol."""
    tail_tol = ctx.tol_quadrature if tail_tol is None else tail_tol
    q = ctx.q_float

    if sup_bound is None:
        samples = [complex(g(q**k)) for k in range(sample_nodes)]
        if not all(cmath.isfinite(value) for value in samples):
            raise QNumError("Jackson integrand is not finite on the sample nodes; no sup estimate available.")
        sup_bound = 2.0 * max(abs(value) for value in samples)
    if not math.isfinite(sup_bound):
        raise QNumError("Jackson integrand has no finite sup estimate; the tail bound cannot converge.")

    last = 0
    if sup_bound > 0 and tail_tol > 0:
        last = max(0, int(math.ceil(math.log(tail_tol / sup_bound) / math.log(q))) - 1)
        while sup_bound * q ** (last + 1) >= tail_tol:
            last += 1

    values = [q**k * complex(g(q**k)) for k in range(last + 1)]
    real = (1 - q) * math.fsum(v.real for v in values)
    imag = (1 - q) * math.fsum(v.imag for v in values)
    value: complex | float = complex(real, imag) if imag != 0 else real
    tail = sup_bound * q ** (last + 1)
    logger.debug("Jackson integral used %s nodes (tail bound %.3g)", last + 1, tail)
    return JacksonResult(value=value, terms=last + 1, tail_bound=tail)
