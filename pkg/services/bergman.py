"""Analytic model H^2(D, dmu): radial quadrature, basis, kernel and Toeplitz quantization.

The measure dmu is atomic in the radius: level m sits at |zeta| = q^{m/2} with
mass w_m = q^m prod_{i>=0} (1 - q^{m+i+1}). Angular integrals use the uniform
rule, so a matrix entry T(f)_{ab} is assembled per level from one FFT of the
sampled symbol.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

import numpy as np

from services.opmat import StateVector, TruncOp, monomial_norms, op_norm
from services.polalg import (
    BoundaryFunction,
    NormalPoly,
    PolynomialError,
    poisson_kernel_boundary,
)
from services.qnum import (
    QContext,
    euler_series,
    euler_terms,
    pochhammer_terms,
    q_pochhammer,
)

logger = logging.getLogger(__name__)


class QuadratureError(RuntimeError):
    """Raised when a quadrature, kernel or quantization request is out of range."""


# |eta| may exceed the configured radius by rounding (0.95 * e^{i theta})
RADIUS_SLACK = 1e-12


@dataclass(frozen=True)
class RadialLevel:
    m: int
    radius: float
    weight: float


@dataclass(frozen=True)
class BergmanGrid:
    ctx: QContext
    levels: tuple[RadialLevel, ...]
    angular_count: int
    product_depth: int

    @classmethod
    def build(cls, ctx: QContext, angular_count: int | None = None) -> "BergmanGrid":
        """Levels until q^{M+1} < 1e-14 (1 - q); the infinite product is cut by its own tail bound.

        Grids are immutable and cached per (context, angular count).
        """
        return _build_grid(cls, ctx, angular_count or ctx.angular_nodes)

    @classmethod
    def _assemble(cls, ctx: QContext, angular_count: int) -> "BergmanGrid":
        q = ctx.q_float
        if angular_count < 4:
            raise QuadratureError(f"Need at least 4 angular nodes, got {angular_count}.")

        tail = 1e-14 * (1 - q)
        last = int(math.ceil(math.log(tail) / math.log(q)))
        while q ** (last + 1) >= tail:
            last += 1
        depth = pochhammer_terms(q, ctx, ctx.tol_quadrature * 1e-2)

        # (q^{m+1}; q)_inf from (q; q)_inf by peeling one factor per level
        product = float(q_pochhammer(q, ctx, depth))
        levels = []
        for m in range(last + 1):
            if m > 0:
                product /= 1 - q**m
            levels.append(RadialLevel(m=m, radius=q ** (m / 2), weight=q**m * product))
        grid = cls(ctx=ctx, levels=tuple(levels), angular_count=angular_count, product_depth=depth)
        logger.debug("Built Bergman grid with %s levels, %s angular nodes (%s)", len(levels), angular_count, ctx.label)
        return grid

    @property
    def radii(self) -> np.ndarray:
        return np.array([level.radius for level in self.levels])

    @property
    def weights(self) -> np.ndarray:
        return np.array([level.weight for level in self.levels])

    @property
    def total_mass(self) -> float:
        return math.fsum(level.weight for level in self.levels)

    def thetas(self, count: int | None = None) -> np.ndarray:
        count = count or self.angular_count
        return 2 * np.pi * np.arange(count) / count

    def nodes(self, count: int | None = None) -> np.ndarray:
        """Complex nodes, one row per radial level."""
        return self.radii[:, None] * np.exp(1j * self.thetas(count))[None, :]

    def integrate(self, values: np.ndarray) -> complex:
        """Angular average first, then the radial sum in ascending m."""
        angular = np.mean(values, axis=1)
        return complex(np.dot(self.weights, angular))

    def write_csv(self, output_path: Path) -> Path:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with output_path.open("w", newline="", encoding="utf-8") as fp:
            writer = csv.writer(fp)
            writer.writerow(["m", "r_m", "w_m"])
            for level in self.levels:
                writer.writerow([level.m, repr(level.radius), repr(level.weight)])
        return output_path


@lru_cache(maxsize=16)
def _build_grid(cls: type, ctx: QContext, angular_count: int) -> BergmanGrid:
    return cls._assemble(ctx, angular_count)


@dataclass(frozen=True)
class DiskSymbol:
    """Symbol sampled on the closed disk, with the facts that control exactness."""

    func: Callable[[np.ndarray], np.ndarray]
    bandwidth: Optional[int] = None
    holomorphic: bool = False
    real: bool = False
    name: str = "symbol"
    meta: Mapping[str, Any] = field(default_factory=dict)
    polar: Optional[Callable[[np.ndarray, int], np.ndarray]] = None

    def __call__(self, zeta: Any) -> np.ndarray:
        return np.asarray(self.func(np.asarray(zeta, dtype=complex)), dtype=complex)

    def sample_grid(self, grid: "BergmanGrid", count: int) -> np.ndarray:
        """Values on grid.nodes(count); a polar sampler (radii, count) -> rows is used when given."""
        if self.polar is not None:
            return np.asarray(self.polar(grid.radii, count), dtype=complex)
        return self(grid.nodes(count))

    @classmethod
    def from_poly(cls, p: NormalPoly) -> "DiskSymbol":
        terms = [((m, n), complex(value)) for (m, n), value in p.sorted_terms()]

        def evaluate(zeta: np.ndarray) -> np.ndarray:
            total = np.zeros_like(zeta, dtype=complex)
            for (m, n), value in terms:
                total = total + value * np.conj(zeta) ** m * zeta**n
            return total

        holomorphic = all(m == 0 for (m, _), _ in terms)
        return cls(evaluate, bandwidth=p.degree, holomorphic=holomorphic, name=str(p))

    @classmethod
    def harmonic_extension(cls, f: BoundaryFunction) -> "DiskSymbol":
        """Pf(r e^{it}) = sum_d c_d r^{|d|} e^{idt}, evaluated from the Fourier data."""
        coefficients = {d: f.coefficient(d) for d in f.fourier}

        def evaluate(zeta: np.ndarray) -> np.ndarray:
            total = np.zeros_like(zeta, dtype=complex)
            for d, value in sorted(coefficients.items()):
                total = total + value * (zeta**d if d >= 0 else np.conj(zeta) ** (-d))
            return total

        holomorphic = all(d >= 0 for d in coefficients)
        real = all(abs(coefficients.get(-d, 0) - np.conj(value)) <= 1e-14 for d, value in coefficients.items())
        return cls(evaluate, bandwidth=f.bandwidth, holomorphic=holomorphic, real=real, name="harmonic extension")


Symbol = Union[BoundaryFunction, DiskSymbol, NormalPoly]


def as_disk_symbol(f: Symbol) -> DiskSymbol:
    if isinstance(f, DiskSymbol):
        return f
    if isinstance(f, BoundaryFunction):
        return DiskSymbol.harmonic_extension(f)
    if isinstance(f, NormalPoly):
        return DiskSymbol.from_poly(f)
    raise QuadratureError(f"Unsupported symbol type {type(f).__name__}.")


def basis_eval(n: int, zeta: Any, ctx: QContext) -> Any:
    """e_n(zeta) = zeta^n / sqrt(prod_{i<n} (1 - q^{i+1}))."""
    if n < 0:
        raise QuadratureError(f"Basis index must be nonnegative, got {n}.")
    if np.any(np.abs(zeta) > 1 + 1e-12):
        raise QuadratureError("Basis functions are evaluated on the closed unit disk only.")
    q = ctx.q_float
    norm = math.sqrt(math.prod(1 - q ** (i + 1) for i in range(n)))
    return np.asarray(zeta, dtype=complex) ** n / norm if np.ndim(zeta) else complex(zeta) ** n / norm


def moment(n: int, grid: BergmanGrid) -> float:
    """Quadrature value of the integral of |zeta|^{2n} against dmu."""
    if n < 0:
        raise QuadratureError(f"Moments are indexed by n >= 0, got {n}.")
    return math.fsum(level.weight * level.radius ** (2 * n) for level in grid.levels)


def gram_matrix(grid: BergmanGrid, size: int) -> np.ndarray:
    """Gram matrix of e_0..e_{size-1} on the grid."""
    nodes = grid.nodes()
    values = np.stack([basis_eval(n, nodes, grid.ctx) for n in range(size)])
    gram = np.zeros((size, size), dtype=complex)
    for a in range(size):
        for b in range(size):
            gram[a, b] = grid.integrate(np.conj(values[a]) * values[b])
    return gram


def kernel_eval(zeta: complex, etabar: complex, ctx: QContext, terms: int | None = None) -> complex:
    """K(zeta, etabar) = 1 / (zeta etabar; q)_inf via a truncated Pochhammer product."""
    x = complex(zeta) * complex(etabar)
    if abs(x) >= 1:
        raise QuadratureError(f"Kernel needs |zeta etabar| < 1, got {abs(x):.6g}.")
    terms = terms or pochhammer_terms(x, ctx, ctx.tol_quadrature * 1e-3)
    return 1 / complex(q_pochhammer(x, ctx, terms))


def kernel_series(zeta: complex, etabar: complex, ctx: QContext, terms: int | None = None) -> complex:
    """Series form 1 + sum_n (zeta etabar)^n / prod_{k<=n} (1 - q^k)."""
    x = complex(zeta) * complex(etabar)
    if abs(x) >= 1:
        raise QuadratureError(f"Kernel needs |zeta etabar| < 1, got {abs(x):.6g}.")
    terms = terms or euler_terms(x, ctx, ctx.tol_quadrature * 1e-3)
    return complex(euler_series(x, ctx, terms))


def kernel_values(x: np.ndarray, ctx: QContext) -> np.ndarray:
    """Vectorized 1 / (x; q)_inf for an array of products zeta * etabar."""
    x = np.asarray(x, dtype=complex)
    largest = float(np.max(np.abs(x))) if x.size else 0.0
    if largest >= 1:
        raise QuadratureError(f"Kernel needs |zeta etabar| < 1, got {largest:.6g}.")
    terms = pochhammer_terms(largest, ctx, ctx.tol_quadrature * 1e-3)
    product = np.ones_like(x)
    factor = x.copy()
    for _ in range(terms):
        product *= 1 - factor
        factor *= ctx.q_float
    return 1 / product


def reproduce(phi: Callable[[np.ndarray], np.ndarray], zeta: complex, grid: BergmanGrid) -> complex:
    """Integral of K(zeta, etabar) phi(eta) dmu(eta) over the grid."""
    nodes = grid.nodes()
    kernel = kernel_values(complex(zeta) * np.conj(nodes), grid.ctx)
    return grid.integrate(kernel * phi(nodes))


def coherent_state(eta: complex, ctx: QContext) -> StateVector:
    """Normalized kernel vector at eta; coefficients conj(e_n(eta)) / sqrt(K(eta, etabar))."""
    eta = complex(eta)
    if abs(eta) >= 1:
        raise QuadratureError(f"Coherent states need |eta| < 1, got {abs(eta):.6g}.")
    if abs(eta) > ctx.coherent_radius + RADIUS_SLACK:
        raise QuadratureError(f"|eta|={abs(eta):.6g} exceeds the coherent-state radius {ctx.coherent_radius}.")
    norms = monomial_norms(ctx)
    powers = np.conj(eta) ** np.arange(ctx.trunc_dim)
    scale = math.sqrt(kernel_eval(eta, eta.conjugate(), ctx).real)
    return StateVector(powers / norms / scale, ctx)


def coherent_states(etas: Any, ctx: QContext) -> np.ndarray:
    """Coherent states at every point of ``etas`` as the columns of an N x len(etas) matrix."""
    etas = np.asarray(etas, dtype=complex).ravel()
    radii = np.abs(etas)
    largest = float(np.max(radii)) if etas.size else 0.0
    if largest >= 1:
        raise QuadratureError(f"Coherent states need |eta| < 1, got {largest:.6g}.")
    if largest > ctx.coherent_radius + RADIUS_SLACK:
        raise QuadratureError(f"|eta|={largest:.6g} exceeds the coherent-state radius {ctx.coherent_radius}.")
    powers = np.conj(etas)[None, :] ** np.arange(ctx.trunc_dim)[:, None]
    scale = np.sqrt(kernel_values(radii**2, ctx).real)
    return powers / monomial_norms(ctx)[:, None] / scale[None, :]


def coherent_tail(eta: complex, ctx: QContext) -> float:
    """Mass of the coherent state lost to truncation at N coefficients."""
    return max(0.0, 1.0 - coherent_state(eta, ctx).norm ** 2)


def expectation(a: TruncOp, phi: StateVector) -> complex:
    return complex(np.vdot(phi.coeffs, a.to_float().entries @ phi.coeffs))


def toeplitz_quantize(f: Symbol, grid: BergmanGrid, ctx: QContext | None = None) -> TruncOp:
    """T(f)_{ab} = sum_m w_m F_m[a - b] r_m^{a+b} / (c_a c_b), F_m the angular FFT of f on level m."""
    ctx = ctx or grid.ctx
    if ctx.q_exact != grid.ctx.q_exact:
        raise QuadratureError(f"Grid was built for q={grid.ctx.q_exact}, context has q={ctx.q_exact}.")
    symbol = as_disk_symbol(f)
    size = ctx.trunc_dim
    count = max(grid.angular_count, 2 * size)
    aliasing = symbol.bandwidth is None or symbol.bandwidth >= count // 2
    if symbol.bandwidth is not None and aliasing:
        logger.warning("Symbol bandwidth %s reaches %s angular nodes; expect aliasing", symbol.bandwidth, count)

    samples = symbol.sample_grid(grid, count)
    if not np.all(np.isfinite(samples)):
        raise QuadratureError(f"Symbol {symbol.name!r} is not finite on every grid node.")
    spectra = np.fft.fft(samples, axis=1) / count

    # entries depend on a - b through F_m and on a + b through r_m, so the level sum
    # is one (offset x level) @ (level x power) product
    offsets = np.arange(-(size - 1), size)
    powers = np.arange(2 * size - 1)
    coefficients = grid.weights[:, None] * spectra[:, offsets % count]
    table = coefficients.T @ (grid.radii[:, None] ** powers[None, :])
    rows, cols = np.indices((size, size))
    inv_norms = 1 / monomial_norms(ctx)
    entries = table[rows - cols + size - 1, rows + cols] * np.outer(inv_norms, inv_norms)
    return TruncOp(entries, ctx, size, meta={"angular_nodes": count, "aliasing_warning": bool(aliasing)})


@dataclass(frozen=True)
class NormBoundReport:
    op_norm: float
    grid_sup: float
    coherent_lower: Optional[float]
    holomorphic: bool
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "op_norm": self.op_norm,
            "grid_sup": self.grid_sup,
            "coherent_lower": self.coherent_lower,
            "holomorphic": self.holomorphic,
            "passed": self.passed,
        }


def coherent_sup(a: TruncOp, ctx: QContext, *, rings: int = 8, angles: int = 32) -> float:
    """sup of |<phi_eta, A phi_eta>| over a polar net with |eta| <= coherent_radius."""
    radii = np.linspace(0.0, ctx.coherent_radius, rings)
    thetas = 2 * np.pi * np.arange(angles) / angles
    states = coherent_states(radii[:, None] * np.exp(1j * thetas)[None, :], ctx)
    values = np.einsum("ns,ns->s", states.conj(), a.to_float().entries @ states)
    return float(np.max(np.abs(values)))


def norm_bound_check(
    f: Symbol,
    ctx: QContext,
    grid: BergmanGrid | None = None,
    *,
    rel_tol: float = 1e-3,
    norm_tol: float = 1e-6,
) -> NormBoundReport:
    """Sandwich coherent lower bound <= ||T(f)|| <= sup |f| on the grid."""
    grid = grid or BergmanGrid.build(ctx)
    symbol = as_disk_symbol(f)
    a = toeplitz_quantize(symbol, grid, ctx)
    norm = op_norm(a, tol=norm_tol)
    grid_sup = float(np.max(np.abs(symbol(grid.nodes()))))
    lower = coherent_sup(a, ctx) if symbol.holomorphic else None
    passed = norm <= grid_sup * (1 + rel_tol) + ctx.tol_identity
    if lower is not None:
        passed = passed and lower <= norm * (1 + rel_tol) + ctx.tol_identity
    return NormBoundReport(norm, grid_sup, lower, symbol.holomorphic, passed)


# ----- symbol input -----
def parse_symbol(source: Union[str, Mapping[str, Any]], ctx: QContext) -> Symbol:
    """Fourier JSON map {"d": [re, im]} or a builtin: "poisson_kernel[:pole]", "monomial:m,n"."""
    if isinstance(source, Mapping):
        try:
            return BoundaryFunction.from_json(source)
        except PolynomialError as exc:
            raise QuadratureError(str(exc)) from exc
    text = source.strip()
    if text.startswith("{"):
        try:
            return parse_symbol(json.loads(text), ctx)
        except json.JSONDecodeError as exc:
            raise QuadratureError(f"Symbol is not valid JSON: {exc}") from exc
    name, _, argument = text.partition(":")
    if name == "poisson_kernel":
        try:
            pole = complex(argument) if argument else 0.5
        except ValueError as exc:
            raise QuadratureError(f"Poisson kernel pole must be a number, got {argument!r}.") from exc
        if abs(pole) >= 1:
            raise QuadratureError("The Poisson kernel pole must lie inside the unit disk.")
        bandwidth = 0
        if abs(pole) > 0:
            bandwidth = int(math.ceil(math.log(ctx.tol_quadrature) / math.log(abs(pole))))
        return poisson_kernel_boundary(pole, bandwidth)
    if name == "monomial":
        try:
            m, n = (int(part) for part in argument.split(","))
        except ValueError as exc:
            raise QuadratureError(f"Monomial builtin needs 'monomial:m,n', got {text!r}.") from exc
        return NormalPoly.monomial(m, n, ctx)
    raise QuadratureError(f"Unknown symbol {text!r}; pass Fourier JSON, 'poisson_kernel' or 'monomial:m,n'.")
