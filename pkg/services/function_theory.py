"""Holomorphic, antiholomorphic and harmonic elements of C(D_q) at finite truncation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from services.bergman import BergmanGrid, DiskSymbol, coherent_sup, toeplitz_quantize
from services.gaussian import GaussianRational
from services.opmat import (
    Generator,
    TruncOp,
    generator_bracket,
    integral_matrix,
    integral_truncation_bound,
    interior_residual,
    min_eigenvalue,
    monomial_norms,
    op_norm,
)
from services.polalg import BoundaryFunction
from services.qnum import QContext, q_derivative, q_int

logger = logging.getLogger(__name__)

BOUNDARY_SAMPLES = 4096
POISSON_CHUNK = 4096


class FunctionTheoryError(RuntimeError):
    """Raised when a function-theoretic diagnostic's precondition fails."""


class Classification(str, Enum):
    WEAKLY_HOLO = "weakly_holo"
    WEAKLY_ANTIHOLO = "weakly_antiholo"
    HARMONIC = "harmonic"
    NONE = "none"


def _fourier_json(f: Optional[BoundaryFunction]) -> Optional[Dict[str, list]]:
    return None if f is None else f.to_json()


@dataclass(frozen=True)
class ScalabilityRecord:
    scalable: bool
    certificate: str
    radius: Optional[float] = None
    sequence: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scalable": self.scalable,
            "certificate": self.certificate,
            "radius": self.radius,
            "sequence": self.sequence,
        }


@dataclass(frozen=True)
class HolomorphyReport:
    commutator_norm: float
    commutator_bar_norm: float
    classification: Classification
    scalability: Optional[ScalabilityRecord] = None
    extracted_symbol: Optional[BoundaryFunction] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "commutator_norm": self.commutator_norm,
            "commutator_bar_norm": self.commutator_bar_norm,
            "classification": self.classification.value,
            "scalability": None if self.scalability is None else self.scalability.to_dict(),
            "extracted_symbol": _fourier_json(self.extracted_symbol),
        }


def _tolerance(a: TruncOp) -> float:
    entries = a.to_float().entries
    scale = float(np.max(np.abs(entries))) if entries.size else 0.0
    return a.ctx.tol_identity * max(1.0, scale)


def _commutator_residuals(a: TruncOp) -> tuple[float, float]:
    zeros = TruncOp(a.entries * 0, a.ctx, a.dim, a.exact)
    with_z = generator_bracket(Generator.Z, a)
    with_zbar = generator_bracket(Generator.ZBAR, a)
    return interior_residual(with_z, zeros), interior_residual(with_zbar, zeros)


def _require_margin(a: TruncOp, needed: int, operation: str) -> None:
    if a.margin < needed:
        raise FunctionTheoryError(f"{operation} needs margin >= {needed}, got {a.margin}.")


def triangular_split(a: TruncOp) -> tuple[TruncOp, TruncOp]:
    """Lower triangle with the diagonal (holomorphic part) and strict upper triangle."""
    lower = np.tril(a.entries)
    upper = np.triu(a.entries, 1)
    return (
        TruncOp(lower, a.ctx, a.margin, a.exact),
        TruncOp(upper, a.ctx, a.margin, a.exact),
    )


@dataclass(frozen=True)
class HarmonicCheck:
    flag: bool
    holomorphic_residual: float
    antiholomorphic_residual: float


def is_weakly_harmonic(a: TruncOp) -> HarmonicCheck:
    """a = a1 + a2 with [z, a1] = 0 and [zbar, a2] = 0 on the interior block."""
    _require_margin(a, 4, "is_weakly_harmonic")
    a1, a2 = triangular_split(a)
    tol = _tolerance(a)
    holo, _ = _commutator_residuals(a1)
    _, antiholo = _commutator_residuals(a2)
    return HarmonicCheck(holo < tol and antiholo < tol, holo, antiholo)


def classify(a: TruncOp, *, with_diagnostics: bool = True) -> HolomorphyReport:
    _require_margin(a, 4, "classify")
    tol = _tolerance(a)
    residual_z, residual_zbar = _commutator_residuals(a)
    if residual_z < tol:
        classification = Classification.WEAKLY_HOLO
    elif residual_zbar < tol:
        classification = Classification.WEAKLY_ANTIHOLO
    elif is_weakly_harmonic(a).flag:
        classification = Classification.HARMONIC
    else:
        classification = Classification.NONE

    report = HolomorphyReport(residual_z, residual_zbar, classification)
    if not with_diagnostics:
        return report
    scalability = None
    if classification in (Classification.WEAKLY_HOLO, Classification.WEAKLY_ANTIHOLO):
        scalability = scalability_diagnostic(a, classification=classification)
    extracted = symbol_extract(a) if a.margin >= 8 else None
    return HolomorphyReport(residual_z, residual_zbar, classification, scalability, extracted)


# ----- symbols -----
@dataclass(frozen=True)
class SymbolEstimate:
    boundary: BoundaryFunction
    depth: int
    drift: Dict[int, float]
    reliable: bool


def symbol_depth(margin: int, d: int) -> int:
    """Row index read for mode d: floor(0.8 margin), pulled in so that k + |d| stays inside the margin."""
    return min(int(math.floor(0.8 * margin)), margin - 1 - abs(d))


def _diagonal_entry(entries: np.ndarray, k: int, d: int) -> complex:
    return complex(entries[k + d, k] if d >= 0 else entries[k, k - d])


def estimate_symbol(a: TruncOp, *, threshold: float | None = None) -> SymbolEstimate:
    """Deep-diagonal estimator: A[k+d, k] for d >= 0 and A[k, k+|d|] for d < 0.

    Modes |d| <= margin // 2 are read at k = symbol_depth(margin, d); a nonzero
    diagonal just beyond that reach marks the estimate unreliable instead of
    being dropped.
    """
    _require_margin(a, 8, "symbol_extract")
    entries = a.to_float().entries
    reach = a.margin // 2
    threshold = a.ctx.tol_identity if threshold is None else threshold

    fourier: Dict[int, complex] = {}
    drift: Dict[int, float] = {}
    for d in range(-reach, reach + 1):
        k = symbol_depth(a.margin, d)
        value = _diagonal_entry(entries, k, d)
        if abs(value) > threshold:
            fourier[d] = value
            drift[d] = abs(value - _diagonal_entry(entries, k - 1, d))
    reliable = all(value <= a.ctx.tol_identity for value in drift.values())
    if not reliable:
        logger.warning("Symbol estimate drifts by %.3g; entries are not Toeplitz yet", max(drift.values()))

    overflow = 0.0
    if reach + 1 <= a.margin - 2:
        for d in (reach + 1, -(reach + 1)):
            overflow = max(overflow, abs(_diagonal_entry(entries, symbol_depth(a.margin, d), d)))
    if overflow > threshold:
        reliable = False
        logger.warning("Symbol has modes beyond |d| = %s (entry %.3g); the estimate is truncated", reach, overflow)
    return SymbolEstimate(BoundaryFunction(fourier=fourier), symbol_depth(a.margin, 0), drift, reliable)


def symbol_extract(a: TruncOp) -> BoundaryFunction:
    return estimate_symbol(a).boundary


# ----- Dirichlet problem -----
def dirichlet_solve(f: BoundaryFunction, ctx: QContext) -> TruncOp:
    """T(Pf) = sum_{d>=0} c_d z^d + sum_{d<0} c_d zbar^{|d|}; pure powers compress exactly."""
    if f.bandwidth > ctx.trunc_dim // 2:
        raise FunctionTheoryError(f"Bandwidth {f.bandwidth} exceeds N/2 = {ctx.trunc_dim // 2}.")
    size = ctx.trunc_dim
    weights = np.sqrt(1 - ctx.q_float ** np.arange(1, size))
    entries = f.coefficient(0) * np.eye(size, dtype=complex)
    ratio = np.ones(size)
    for d in range(1, f.bandwidth + 1):
        # z^d e_k = prod_{j=k+1}^{k+d} sqrt(1 - q^j) e_{k+d}; zbar^d is the transpose
        ratio = ratio[: size - d] * weights[d - 1 :]
        k = np.arange(size - d)
        entries[k + d, k] += f.coefficient(d) * ratio
        entries[k, k + d] += f.coefficient(-d) * ratio
    return TruncOp(entries, ctx, size, meta={"bandwidth": f.bandwidth})


def _poisson_values(f: BoundaryFunction, zeta: np.ndarray, nodes: int) -> np.ndarray:
    thetas = 2 * np.pi * np.arange(nodes) / nodes
    boundary = f.evaluate(thetas)
    circle = np.exp(1j * thetas)
    flat = np.asarray(zeta, dtype=complex).ravel()
    values = np.empty(flat.shape, dtype=complex)
    # points on the circle give 0/0 here and are overwritten with the boundary data below
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, flat.size, POISSON_CHUNK):
            chunk = flat[start : start + POISSON_CHUNK]
            kernel = (1 - np.abs(chunk[:, None]) ** 2) / np.abs(circle[None, :] - chunk[:, None]) ** 2
            values[start : start + POISSON_CHUNK] = kernel @ boundary / nodes
    on_circle = np.abs(flat) >= 1 - 1e-15
    if np.any(on_circle):
        values[on_circle] = f.evaluate(np.angle(flat[on_circle]))
    return values.reshape(np.shape(zeta))


def _poisson_polar(f: BoundaryFunction, radii: np.ndarray, count: int, nodes: int) -> np.ndarray:
    """The same uniform-rule integral on circles |zeta| = r at ``count`` equispaced angles.

    When ``count`` divides ``nodes`` each circle is one circular convolution of the
    kernel with the boundary samples, computed by FFT.
    """
    radii = np.asarray(radii, dtype=float)
    thetas = 2 * np.pi * np.arange(count) / count
    if nodes % count:
        return _poisson_values(f, radii[:, None] * np.exp(1j * thetas)[None, :], nodes)

    phis = 2 * np.pi * np.arange(nodes) / nodes
    spectrum = np.fft.fft(f.evaluate(phis))
    r = radii[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = (1 - r**2) / (1 - 2 * r * np.cos(phis)[None, :] + r**2)
    values = np.fft.ifft(np.fft.fft(kernel, axis=1) * spectrum[None, :], axis=1) / nodes
    values = values[:, :: nodes // count]
    on_circle = radii >= 1 - 1e-15
    if np.any(on_circle):
        values[on_circle] = f.evaluate(thetas)
    return values


def poisson_eval(f: BoundaryFunction, zeta: complex, ctx: QContext) -> complex:
    """Uniform-rule Poisson integral of the boundary data at an interior point."""
    if abs(zeta) >= 1:
        raise FunctionTheoryError(f"Poisson integral needs |zeta| < 1, got {abs(zeta):.6g}.")
    return complex(_poisson_values(f, np.array([complex(zeta)]), ctx.poisson_nodes)[0])


def poisson_symbol(f: BoundaryFunction, ctx: QContext) -> DiskSymbol:
    """Disk symbol sampled through the Poisson integral; boundary values are used on |zeta| = 1."""
    return DiskSymbol(
        lambda zeta: _poisson_values(f, zeta, ctx.poisson_nodes),
        bandwidth=f.bandwidth,
        holomorphic=all(d >= 0 for d in f.fourier),
        name="poisson extension",
        polar=lambda radii, count: _poisson_polar(f, radii, count, ctx.poisson_nodes),
    )


def dirichlet_cross_check(f: BoundaryFunction, ctx: QContext, grid: BergmanGrid | None = None) -> float:
    """Interior gap between the Fourier route and quantizing the Poisson-quadrature extension."""
    grid = grid or BergmanGrid.build(ctx)
    fourier_route = dirichlet_solve(f, ctx)
    quadrature_route = toeplitz_quantize(poisson_symbol(f, ctx), grid, ctx)
    return interior_residual(fourier_route, quadrature_route)


# ----- antiderivatives -----
Coefficient = Union[Fraction, GaussianRational, complex, float, int]


def _is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction, GaussianRational)) and not isinstance(value, bool)


def q_antiderivative(k: Sequence[Coefficient], ctx: QContext) -> List[Coefficient]:
    """Termwise zbar^d -> zbar^{d+1} / [d+1]_q, so that delta_q(g) = k."""
    result: List[Coefficient] = [Fraction(0)]
    for d, value in enumerate(k):
        divisor = q_int(d + 1, ctx)
        if _is_exact(value):
            result.append(GaussianRational.coerce(value) / divisor)
        else:
            result.append(complex(value) / float(divisor))
    return result


def evaluate_coefficients(coefficients: Sequence[Coefficient], y: Any) -> Any:
    total: Any = 0
    for value in reversed(coefficients):
        total = total * y + value
    return total


def antiderivative_series(
    k: Union[Sequence[Coefficient], Callable[[Any], Any]],
    y: Any,
    ctx: QContext,
    *,
    weighted: bool = True,
    terms: int | None = None,
) -> complex:
    """(1 - q) y sum_n q^n k(q^n y) when weighted; the literal series without q^n otherwise."""
    if callable(k):
        func = k
    else:
        coefficients = [complex(value) for value in k]
        func = lambda t: evaluate_coefficients(coefficients, t)  # noqa: E731
    q = ctx.q_float
    if not weighted and abs(complex(func(0.0))) > 0:
        raise FunctionTheoryError("The unweighted antiderivative series diverges when k(0) != 0.")
    if terms is None:
        terms = int(math.ceil(math.log(ctx.tol_quadrature * 1e-3) / math.log(q))) + 1
    total = 0j
    for n in range(terms):
        weight = q**n if weighted else 1.0
        total += weight * complex(func(q**n * complex(y)))
    return complex((1 - q) * complex(y) * total)


@dataclass(frozen=True)
class AntiderivativeDiscrepancy:
    degree: int
    predicted_ratio: Union[Fraction, float]
    measured_ratio: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        predicted = self.predicted_ratio
        return {
            "degree": self.degree,
            "predicted_ratio": str(predicted) if isinstance(predicted, Fraction) else predicted,
            "measured_ratio": self.measured_ratio,
        }


def antiderivative_discrepancy(d: int, ctx: QContext, y: float = 0.5) -> AntiderivativeDiscrepancy:
    """delta_q(g) / k for k = zbar^d when g is built by the unweighted series: [d+1]_q / [d]_q."""
    if d == 0:
        return AntiderivativeDiscrepancy(0, math.inf, None)
    monomial = [0] * d + [1]
    series = lambda t: antiderivative_series(monomial, t, ctx, weighted=False)  # noqa: E731
    measured = complex(q_derivative(series, y, ctx)) / y**d
    return AntiderivativeDiscrepancy(d, q_int(d + 1, ctx) / q_int(d, ctx), float(measured.real))


# ----- diagnostics -----
def boundary_samples(f: BoundaryFunction, count: int = BOUNDARY_SAMPLES) -> np.ndarray:
    return f.evaluate(2 * np.pi * np.arange(count) / count)


def is_real_boundary(f: BoundaryFunction, tol: float = 1e-14) -> bool:
    return all(abs(f.coefficient(-d) - f.coefficient(d).conjugate()) <= tol for d in f.fourier)


@dataclass(frozen=True)
class HarnackReport:
    steps: List[Dict[str, float]]
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "steps": self.steps}


def harnack_sequence(k_max: int) -> List[BoundaryFunction]:
    """f_k = sum_{j=1}^{k} 2^{-j} (1 + cos(j theta)), increasing and bounded by 2."""
    sequence = []
    fourier: Dict[int, complex] = {}
    for j in range(1, k_max + 1):
        fourier[0] = fourier.get(0, 0) + 2.0**-j
        fourier[j] = 2.0 ** (-j) / 2
        fourier[-j] = 2.0 ** (-j) / 2
        sequence.append(BoundaryFunction(fourier=dict(fourier)))
    return sequence


def harnack_check(ctx: QContext, k_max: int = 10, *, tol: float = 1e-10) -> HarnackReport:
    """Operator-order monotonicity and ||A_{k+1} - A_k|| <= 2^{-k} for the Harnack sequence."""
    operators = [dirichlet_solve(f, ctx) for f in harnack_sequence(k_max + 1)]
    steps = []
    passed = True
    for k in range(1, k_max + 1):
        difference = operators[k] - operators[k - 1]
        lowest = min_eigenvalue(difference)
        norm = op_norm(difference, method="svd")
        ok = lowest >= -tol and norm <= 2.0**-k + tol
        passed = passed and ok
        steps.append({"k": k, "min_eigenvalue": lowest, "norm": norm, "bound": 2.0**-k})
    return HarnackReport(steps, passed)


@dataclass(frozen=True)
class HarmonicReport:
    mean_value: complex
    boundary_mean: complex
    mean_error: float
    op_norm: float
    boundary_sup: float
    coherent_lower: float
    norm_gap: float
    min_eigenvalue: Optional[float]
    boundary_min: Optional[float]
    harnack: Optional[HarnackReport] = None
    mean_tolerance: float = 1e-10

    @property
    def mean_value_ok(self) -> bool:
        return self.mean_error <= self.mean_tolerance

    @property
    def maximum_principle_ok(self) -> bool:
        """coherent lower bound <= ||A|| <= boundary sup, each up to 1e-3 relative."""
        lower_ok = self.coherent_lower <= self.op_norm * (1 + 1e-3) + 1e-9
        return lower_ok and self.op_norm <= self.boundary_sup * (1 + 1e-3) + 1e-9

    @property
    def passed(self) -> bool:
        ok = self.mean_value_ok and self.maximum_principle_ok
        if self.min_eigenvalue is not None and self.boundary_min is not None and self.boundary_min >= 0:
            ok = ok and self.min_eigenvalue >= -1e-10
        if self.harnack is not None:
            ok = ok and self.harnack.passed
        return ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_value": [self.mean_value.real, self.mean_value.imag],
            "boundary_mean": [self.boundary_mean.real, self.boundary_mean.imag],
            "mean_error": self.mean_error,
            "mean_tolerance": self.mean_tolerance,
            "op_norm": self.op_norm,
            "boundary_sup": self.boundary_sup,
            "coherent_lower": self.coherent_lower,
            "norm_gap": self.norm_gap,
            "min_eigenvalue": self.min_eigenvalue,
            "boundary_min": self.boundary_min,
            "harnack": None if self.harnack is None else self.harnack.to_dict(),
            "passed": self.passed,
        }


def harmonic_diagnostics(
    a: TruncOp,
    f: BoundaryFunction,
    *,
    norm_tol: float = 1e-6,
    harnack_steps: int | None = None,
) -> HarmonicReport:
    """Mean value, maximum principle, positivity and (optionally) the Harnack sequence."""
    check = is_weakly_harmonic(a)
    if not check.flag:
        raise FunctionTheoryError(
            f"Element is not weakly harmonic (residuals {check.holomorphic_residual:.3g}, "
            f"{check.antiholomorphic_residual:.3g})."
        )
    mean = complex(integral_matrix(a))
    boundary_mean = f.coefficient(0)
    samples = boundary_samples(f)
    sup = float(np.max(np.abs(samples)))
    norm = op_norm(a, tol=norm_tol)
    lower = coherent_sup(a, a.ctx)

    lowest = boundary_min = None
    if is_real_boundary(f):
        lowest = min_eigenvalue(a)
        boundary_min = float(np.min(samples.real))

    harnack = harnack_check(a.ctx, harnack_steps) if harnack_steps else None
    report = HarmonicReport(
        mean_value=mean,
        boundary_mean=boundary_mean,
        mean_error=abs(mean - boundary_mean),
        op_norm=norm,
        boundary_sup=sup,
        coherent_lower=lower,
        norm_gap=abs(norm - sup) / sup if sup > 0 else norm,
        min_eigenvalue=lowest,
        boundary_min=boundary_min,
        harnack=harnack,
        mean_tolerance=1e-10 + integral_truncation_bound(a),
    )
    logger.debug("Harmonic diagnostics at %s: %s", a.ctx.label, report.to_dict())
    return report


def scalability_diagnostic(a: TruncOp, *, classification: Classification | None = None) -> ScalabilityRecord:
    """Root-test certificate for J(a) bounded, from the Taylor data a_d = A[d, 0] / c_d."""
    if classification is None:
        classification = classify(a, with_diagnostics=False).classification
    if classification is Classification.WEAKLY_ANTIHOLO:
        return ScalabilityRecord(True, "antiholomorphic")
    if classification is not Classification.WEAKLY_HOLO:
        raise FunctionTheoryError(f"Scalability diagnostic needs a (anti)holomorphic element, got {classification.value}.")

    op = a.to_float()
    q = op.ctx.q_float
    taylor = np.abs(op.entries[: op.margin, 0]) / monomial_norms(op.ctx)[: op.margin]
    largest = float(np.max(taylor)) if taylor.size else 0.0
    significant = [d for d, value in enumerate(taylor) if value > 1e-10 * largest]
    sequence = [float(taylor[d] * q ** (-d)) for d in significant]
    if len(significant) < 4:
        return ScalabilityRecord(True, "finite", None, sequence)

    slope, _ = np.polyfit(np.array(significant, dtype=float), np.log(sequence), 1)
    radius = float(math.exp(-slope))
    return ScalabilityRecord(radius > 1 + 1e-2, "root_test", radius, sequence)


def poisson_kernel_extension(pole: complex) -> DiskSymbol:
    """Closed-form harmonic extension (1 - |a zeta|^2) / |1 - conj(a) zeta|^2 of the Poisson kernel at a."""
    pole = complex(pole)
    if abs(pole) >= 1:
        raise FunctionTheoryError("The Poisson kernel pole must lie inside the unit disk.")

    def evaluate(zeta: np.ndarray) -> np.ndarray:
        return (1 - np.abs(pole * zeta) ** 2) / np.abs(1 - np.conj(pole) * zeta) ** 2 + 0j

    return DiskSymbol(evaluate, bandwidth=None, real=True, name=f"poisson kernel at {pole}")
