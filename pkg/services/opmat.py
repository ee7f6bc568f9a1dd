"""Numeric engine: finite truncations of C(D_q) in the canonical basis e_n.

Float mode stores complex128 matrices in the orthonormal basis e_n, where z is
the weighted shift z e_n = sqrt(1 - q^{n+1}) e_{n+1}. Exact mode stores
Fraction/GaussianRational object matrices in the monomial gauge f_n = zeta^n,
where z f_n = f_{n+1} and zbar f_n = (1 - q^n) f_{n-1}. The gauge change is a
diagonal similarity, so algebraic identities, J, the derivatives, diagonals
(hence the integral) and interior blocks agree between the two modes.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, NamedTuple, Optional

import numpy as np

from services.gaussian import GaussianRational
from services.polalg import NormalPoly
from services.qnum import QContext

logger = logging.getLogger(__name__)

FLOAT_LAPLACIAN_MAX_DIM = 48


class TruncationError(RuntimeError):
    """Raised when a truncated operator cannot represent the requested element."""


class ConvergenceError(RuntimeError):
    """Raised when power iteration stalls; carries the last iterate."""

    def __init__(self, message: str, last_iterate: float, iterations: int):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class Derivative(str, Enum):
    PARTIAL = "partial"
    BARPARTIAL = "barpartial"


def _zeros_exact(size: int) -> np.ndarray:
    return np.full((size, size), Fraction(0), dtype=object)


def _to_complex(entries: np.ndarray) -> np.ndarray:
    if entries.dtype != object:
        return entries.astype(complex)
    return np.array([[complex(value) for value in row] for row in entries], dtype=complex).reshape(entries.shape)


def _max_abs(block: np.ndarray) -> float:
    if block.size == 0:
        return 0.0
    if block.dtype == object:
        return max(abs(complex(value)) for value in block.ravel())
    return float(np.max(np.abs(block)))


def _frozen(entries: np.ndarray) -> np.ndarray:
    entries.setflags(write=False)
    return entries


@lru_cache(maxsize=64)
def monomial_norms(ctx: QContext) -> np.ndarray:
    """c_n = ||zeta^n|| in H^2(D, dmu), as floats (cached per context, read-only)."""
    q = ctx.q_float
    norms = np.ones(ctx.trunc_dim)
    for n in range(1, ctx.trunc_dim):
        norms[n] = norms[n - 1] * math.sqrt(1 - q**n)
    return _frozen(norms)


@dataclass(frozen=True)
class TruncOp:
    """N x N truncation of an element of C(D_q) with its trusted interior size."""

    entries: np.ndarray
    ctx: QContext
    margin: int
    exact: bool = False
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        size = self.ctx.trunc_dim
        if self.entries.shape != (size, size):
            raise TruncationError(f"Entries have shape {self.entries.shape}, expected {(size, size)}.")
        if not 0 <= self.margin <= size:
            raise TruncationError(f"Margin {self.margin} must lie in [0, {size}].")
        if self.exact != (self.entries.dtype == object):
            raise TruncationError("Exact operators hold object (Fraction) entries; float operators hold complex.")

    @property
    def dim(self) -> int:
        return self.ctx.trunc_dim

    def interior(self, size: int | None = None) -> np.ndarray:
        size = self.margin if size is None else size
        return self.entries[:size, :size]

    def to_float(self) -> "TruncOp":
        """Orthonormal-basis float matrix; exact operators are moved out of the monomial gauge."""
        if not self.exact:
            return self
        norms = monomial_norms(self.ctx)
        entries = _to_complex(self.entries) * norms[:, None] / norms[None, :]
        return TruncOp(entries, self.ctx, self.margin, exact=False, meta=dict(self.meta))

    def with_meta(self, **updates: Any) -> "TruncOp":
        meta = dict(self.meta)
        meta.update(updates)
        return replace(self, meta=meta)

    def _combine_check(self, other: "TruncOp") -> None:
        if other.ctx.q_exact != self.ctx.q_exact or other.dim != self.dim:
            raise TruncationError(f"Operators live in different contexts ({self.ctx.label} vs {other.ctx.label}).")
        if other.exact != self.exact:
            raise TruncationError("Cannot mix exact and float operators; convert with to_float().")

    def __add__(self, other: "TruncOp") -> "TruncOp":
        self._combine_check(other)
        return TruncOp(self.entries + other.entries, self.ctx, min(self.margin, other.margin), self.exact)

    def __sub__(self, other: "TruncOp") -> "TruncOp":
        self._combine_check(other)
        return TruncOp(self.entries - other.entries, self.ctx, min(self.margin, other.margin), self.exact)

    def __neg__(self) -> "TruncOp":
        return TruncOp(-self.entries, self.ctx, self.margin, self.exact)

    def __matmul__(self, other: "TruncOp") -> "TruncOp":
        self._combine_check(other)
        margin = max(0, self.margin + other.margin - self.dim)
        return TruncOp(self.entries @ other.entries, self.ctx, margin, self.exact)

    def scaled(self, factor: Any) -> "TruncOp":
        if self.exact:
            factor = GaussianRational.coerce(factor)
            entries = np.array([[factor * value for value in row] for row in self.entries], dtype=object)
            return TruncOp(entries.reshape(self.entries.shape), self.ctx, self.margin, True)
        return TruncOp(self.entries * complex(factor), self.ctx, self.margin, False)

    def adjoint(self) -> "TruncOp":
        if self.exact:
            raise TruncationError("The monomial gauge is not unitary; take adjoints in float mode.")
        return TruncOp(self.entries.conj().T.copy(), self.ctx, self.margin, False)


class StateVector(NamedTuple):
    coeffs: np.ndarray
    ctx: QContext

    @classmethod
    def basis(cls, n: int, ctx: QContext) -> "StateVector":
        coeffs = np.zeros(ctx.trunc_dim, dtype=complex)
        coeffs[n] = 1.0
        return cls(coeffs, ctx)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def identity(ctx: QContext, *, exact: bool = False) -> TruncOp:
    size = ctx.trunc_dim
    if exact:
        entries = _zeros_exact(size)
        for n in range(size):
            entries[n, n] = Fraction(1)
        return TruncOp(entries, ctx, size, True)
    return TruncOp(np.eye(size, dtype=complex), ctx, size)


def zeros(ctx: QContext, *, exact: bool = False) -> TruncOp:
    size = ctx.trunc_dim
    if exact:
        return TruncOp(_zeros_exact(size), ctx, size, True)
    return TruncOp(np.zeros((size, size), dtype=complex), ctx, size)


class Generators(NamedTuple):
    z: TruncOp
    zbar: TruncOp
    j: TruncOp


@lru_cache(maxsize=64)
def build_generators(ctx: QContext, *, exact: bool = False) -> Generators:
    """Weighted shift z, its adjoint and the scaling operator j = diag(q^n), cached per context."""
    size = ctx.trunc_dim
    if exact:
        q = ctx.q_exact
        z = _zeros_exact(size)
        zbar = _zeros_exact(size)
        j = _zeros_exact(size)
        for n in range(size):
            j[n, n] = q**n
            if n + 1 < size:
                z[n + 1, n] = Fraction(1)
                zbar[n, n + 1] = 1 - q ** (n + 1)
        return Generators(
            TruncOp(_frozen(z), ctx, size - 1, True),
            TruncOp(_frozen(zbar), ctx, size - 1, True),
            TruncOp(_frozen(j), ctx, size, True),
        )

    q = ctx.q_float
    weights = np.sqrt(1 - q ** np.arange(1, size))
    z = np.zeros((size, size), dtype=complex)
    z[np.arange(1, size), np.arange(size - 1)] = weights
    j = np.diag(q ** np.arange(size)).astype(complex)
    return Generators(
        TruncOp(_frozen(z), ctx, size - 1),
        TruncOp(_frozen(z.conj().T.copy()), ctx, size - 1),
        TruncOp(_frozen(j), ctx, size),
    )


class Generator(str, Enum):
    Z = "z"
    ZBAR = "zbar"


@lru_cache(maxsize=64)
def _shift_weights(ctx: QContext, exact: bool) -> tuple[np.ndarray, np.ndarray]:
    """Subdiagonal weights of z (z[n+1, n]) and superdiagonal weights of zbar (zbar[n, n+1])."""
    size = ctx.trunc_dim
    if exact:
        q = ctx.q_exact
        z_weights = np.array([Fraction(1)] * (size - 1), dtype=object)
        zbar_weights = np.array([1 - q ** (n + 1) for n in range(size - 1)], dtype=object)
        return _frozen(z_weights), _frozen(zbar_weights)
    weights = np.sqrt(1 - ctx.q_float ** np.arange(1, size)).astype(complex)
    return _frozen(weights), _frozen(weights.copy())


def generator_bracket(which: Generator | str, a: TruncOp) -> TruncOp:
    """[z, A] or [zbar, A] from shifted rows and columns of A.

    Equal entry for entry to commutator(build_generators(ctx).z, a), without the
    N^3 products that dominate in exact mode.
    """
    which = Generator(which)
    z_weights, zbar_weights = _shift_weights(a.ctx, a.exact)
    entries = a.entries
    left = _zeros_exact(a.dim) if a.exact else np.zeros(entries.shape, dtype=complex)
    right = _zeros_exact(a.dim) if a.exact else np.zeros(entries.shape, dtype=complex)
    if which is Generator.Z:
        left[1:, :] = entries[:-1, :] * z_weights[:, None]
        right[:, :-1] = entries[:, 1:] * z_weights[None, :]
    else:
        left[:-1, :] = entries[1:, :] * zbar_weights[:, None]
        right[:, 1:] = entries[:, :-1] * zbar_weights[None, :]
    return TruncOp(left - right, a.ctx, max(0, a.margin - 1), a.exact)


def interior_residual(a: TruncOp, b: TruncOp, size: int | None = None) -> float:
    """Largest entry of a - b on the top-left block both operators trust."""
    a._combine_check(b)
    size = min(a.margin, b.margin) if size is None else size
    return _max_abs(a.entries[:size, :size] - b.entries[:size, :size])


def commutator(a: TruncOp, b: TruncOp) -> TruncOp:
    return (a @ b) - (b @ a)


def to_matrix(p: NormalPoly, ctx: QContext | None = None, *, exact: bool = False) -> TruncOp:
    """Evaluate a normal-ordered polynomial on the truncated generators."""
    ctx = ctx or p.ctx
    if ctx.q_exact != p.ctx.q_exact:
        raise TruncationError(f"Polynomial has q={p.ctx.q_exact}, context has q={ctx.q_exact}.")
    size = ctx.trunc_dim
    if p.degree > size // 2:
        raise TruncationError(f"Degree {p.degree} is too large for N={size}; need degree <= N/2.")

    if exact:
        total = _zeros_exact(size)
        for (m, n), coefficient in p.sorted_terms():
            word = _exact_word(m, n, ctx)
            total = total + np.array([[coefficient * value for value in row] for row in word], dtype=object)
        return TruncOp(total, ctx, size - p.degree, True)

    gens = build_generators(ctx)
    max_m = max((m for m, _ in p.terms), default=0)
    max_n = max((n for _, n in p.terms), default=0)
    zbar_powers = [identity(ctx, exact=exact).entries]
    for _ in range(max_m):
        zbar_powers.append(zbar_powers[-1] @ gens.zbar.entries)
    z_powers = [identity(ctx, exact=exact).entries]
    for _ in range(max_n):
        z_powers.append(z_powers[-1] @ gens.z.entries)

    total = zeros(ctx).entries
    for (m, n), coefficient in p.sorted_terms():
        total = total + complex(coefficient) * (zbar_powers[m] @ z_powers[n])
    return TruncOp(total, ctx, size - p.degree, False)


def _exact_word(m: int, n: int, ctx: QContext) -> np.ndarray:
    """zbar^m z^n in the monomial gauge: f_k -> prod_{i<m} (1 - q^{k+n-i}) f_{k+n-m}, zero once k+n >= N."""
    size = ctx.trunc_dim
    q = ctx.q_exact
    word = _zeros_exact(size)
    for k in range(max(0, m - n), size - n):
        top = k + n
        weight = Fraction(1)
        for i in range(m):
            weight *= 1 - q ** (top - i)
        word[top - m, k] = weight
    return word


_AMPLIFICATION_WARNED: set[QContext] = set()


def _amplification_meta(ctx: QContext, amplification: float) -> Dict[str, Any]:
    warn = ctx.tol_norm > 0 and amplification > 1.0 / ctx.tol_norm
    if warn and ctx not in _AMPLIFICATION_WARNED:
        _AMPLIFICATION_WARNED.add(ctx)
        logger.warning(
            "j^{-1} amplification %.3g exceeds 1/tol_norm at %s (reported once per context)",
            amplification,
            ctx.label,
        )
    return {"amplification": amplification, "amplification_warning": warn}


def _nonzero_mask(entries: np.ndarray) -> np.ndarray:
    if entries.dtype == object:
        return np.array([[value != 0 for value in row] for row in entries], dtype=bool).reshape(entries.shape)
    return np.abs(entries) > 0


def scale_J_matrix(a: TruncOp) -> TruncOp:
    """(J A)_{m,n} = q^{n-m} A_{m,n}: conjugation by the truncated j."""
    size = a.dim
    rows, cols = np.indices((size, size))
    offsets = cols - rows
    if a.exact:
        q = a.ctx.q_exact
        factors = np.array([[q ** int(k) for k in row] for row in offsets], dtype=object)
        entries = a.entries * factors
    else:
        entries = a.entries * a.ctx.q_float ** offsets.astype(float)
    used = offsets[_nonzero_mask(a.entries)]
    amplification = a.ctx.q_float ** float(used.min()) if used.size else 1.0
    return TruncOp(entries, a.ctx, a.margin, a.exact, _amplification_meta(a.ctx, max(1.0, amplification)))


class Deltas(NamedTuple):
    delta: TruncOp
    bardelta: TruncOp


def build_deltas(ctx: QContext, *, exact: bool = False) -> Deltas:
    """delta and bardelta from their matrix elements, never by inverting j."""
    size = ctx.trunc_dim
    if exact:
        q = ctx.q_exact
        delta = _zeros_exact(size)
        bardelta = _zeros_exact(size)
        for n in range(size - 1):
            bardelta[n + 1, n] = q ** (-(n + 1)) / (q - 1)
        for n in range(1, size):
            delta[n - 1, n] = (1 - q**n) * q ** (1 - n) / (1 - q)
        return Deltas(TruncOp(delta, ctx, size - 1, True), TruncOp(bardelta, ctx, size - 1, True))

    q = ctx.q_float
    delta = np.zeros((size, size), dtype=complex)
    bardelta = np.zeros((size, size), dtype=complex)
    for n in range(size - 1):
        bardelta[n + 1, n] = q ** (-(n + 1)) * math.sqrt(1 - q ** (n + 1)) / (q - 1)
    for n in range(1, size):
        delta[n - 1, n] = (1 - q ** (-n)) / (1 - 1 / q) * math.sqrt(1 - q**n)
    return Deltas(TruncOp(delta, ctx, size - 1), TruncOp(bardelta, ctx, size - 1))


def _row_scale_inverse_j(entries: np.ndarray, ctx: QContext, exact: bool) -> np.ndarray:
    size = ctx.trunc_dim
    if exact:
        q = ctx.q_exact
        scales = np.array([q ** (-m) for m in range(size)], dtype=object)
        return entries * scales[:, None]
    return entries * (ctx.q_float ** -np.arange(size, dtype=float))[:, None]


def d_op(a: TruncOp, which: Derivative | str) -> TruncOp:
    """partial a = (1-q)^{-1} j^{-1} [zbar, a];  barpartial a = (q-1)^{-1} j^{-1} [z, a]."""
    which = Derivative(which)
    if which is Derivative.PARTIAL:
        bracket = generator_bracket(Generator.ZBAR, a)
        prefactor = 1 / (1 - a.ctx.q_exact)
    else:
        bracket = generator_bracket(Generator.Z, a)
        prefactor = 1 / (a.ctx.q_exact - 1)

    scaled = _row_scale_inverse_j(bracket.entries, a.ctx, a.exact)
    entries = scaled * prefactor if a.exact else scaled * float(prefactor)
    margin = max(0, a.margin - 1)
    rows = np.nonzero(_nonzero_mask(bracket.entries[:margin, :margin]).any(axis=1))[0]
    amplification = a.ctx.q_float ** (-float(rows.max())) if rows.size else 1.0
    meta = _amplification_meta(a.ctx, amplification)
    if not a.exact:
        meta["roundoff_bound"] = amplification * np.finfo(float).eps * max(1.0, _max_abs(a.entries)) * 4
    return TruncOp(entries, a.ctx, margin, a.exact, meta)


def laplacian_matrix(a: TruncOp, order: str = "dbar_d") -> TruncOp:
    """Compose d_op twice; float mode is limited to small N because of j^{-1} amplification."""
    if not a.exact and a.dim > FLOAT_LAPLACIAN_MAX_DIM:
        raise TruncationError(
            f"Float-mode Laplacian needs N <= {FLOAT_LAPLACIAN_MAX_DIM} (got {a.dim}); use exact mode."
        )
    if order == "dbar_d":
        return d_op(d_op(a, Derivative.PARTIAL), Derivative.BARPARTIAL)
    if order == "d_dbar":
        return d_op(d_op(a, Derivative.BARPARTIAL), Derivative.PARTIAL)
    raise TruncationError(f"Unknown Laplacian order {order!r}.")


def quadratic_form(a: TruncOp, phi: StateVector, which: Derivative | str) -> complex:
    """Q(phi) = prefactor * (j^{-1} phi, [x, a] phi) with x = zbar for partial and z for barpartial."""
    which = Derivative(which)
    if not np.any(phi.coeffs):
        raise TruncationError("Quadratic forms need a nonzero vector.")
    op = a.to_float()
    q = op.ctx.q_float
    if which is Derivative.PARTIAL:
        bracket = generator_bracket(Generator.ZBAR, op)
        prefactor = 1 / (1 - q)
    else:
        bracket = generator_bracket(Generator.Z, op)
        prefactor = 1 / (q - 1)
    scaled_phi = phi.coeffs * q ** -np.arange(op.dim, dtype=float)
    return complex(prefactor * np.vdot(scaled_phi, bracket.entries @ phi.coeffs))


def integral_matrix(a: TruncOp) -> Any:
    """(1 - q) sum_k q^k A_kk, exact in exact mode."""
    if a.exact:
        q = a.ctx.q_exact
        total: Any = Fraction(0)
        for k in range(a.dim):
            total = total + a.entries[k, k] * q**k
        return total * (1 - q)
    q = a.ctx.q_float
    weights = (1 - q) * q ** np.arange(a.dim, dtype=float)
    return complex(np.dot(weights, np.diag(a.entries)))


def norm_upper_bound(a: TruncOp) -> float:
    """sqrt(||A||_1 ||A||_inf), an upper bound of the spectral norm."""
    entries = np.abs(a.to_float().entries)
    return float(math.sqrt(entries.sum(axis=0).max() * entries.sum(axis=1).max()))


def integral_truncation_bound(a: TruncOp) -> float:
    """2 ||A|| q^margin: diagonal entries past the margin may be truncation artifacts."""
    return 2 * norm_upper_bound(a) * a.ctx.q_float**a.margin


def _start_vector(size: int) -> np.ndarray:
    vector = np.ones(size, dtype=complex)
    return vector / np.linalg.norm(vector)


def _power_iterate(apply, size: int, tol: float, max_iter: int, label: str) -> float:
    x = _start_vector(size)
    y = apply(x)
    if not np.any(y):
        # all-ones can sit in the kernel; fall back to a ramp
        x = np.arange(1, size + 1, dtype=complex)
        x /= np.linalg.norm(x)
        y = apply(x)
        if not np.any(y):
            return 0.0
    estimate = float(np.vdot(x, y).real)
    for iteration in range(1, max_iter + 1):
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        x = y / norm
        y = apply(x)
        updated = float(np.vdot(x, y).real)
        if abs(updated - estimate) <= tol * max(abs(updated), 1e-300):
            logger.debug("%s converged after %s iterations", label, iteration)
            return updated
        estimate = updated
    raise ConvergenceError(
        f"{label} did not converge within {max_iter} iterations (last estimate {estimate:.12g}).",
        last_iterate=estimate,
        iterations=max_iter,
    )


def op_norm(
    a: TruncOp,
    *,
    tol: float | None = None,
    max_iter: int | None = None,
    method: str = "power",
) -> float:
    """Largest singular value by power iteration on A^* A from the normalized all-ones vector.

    ``method="svd"`` returns the LAPACK value instead, for checks where a
    power-iteration underestimate would bias an upper bound toward passing.
    """
    op = a.to_float()
    if method == "svd":
        return float(np.linalg.norm(op.entries, 2))
    if method != "power":
        raise TruncationError(f"Unknown norm method {method!r}; use 'power' or 'svd'.")
    tol = op.ctx.tol_norm if tol is None else tol
    max_iter = op.ctx.power_max_iter if max_iter is None else max_iter
    gram = op.entries.conj().T @ op.entries
    try:
        squared = _power_iterate(lambda v: gram @ v, op.dim, tol, max_iter, "op_norm")
    except ConvergenceError as exc:
        raise ConvergenceError(str(exc), math.sqrt(max(exc.last_iterate, 0.0)), exc.iterations) from exc
    return math.sqrt(max(squared, 0.0))


def hermitian_part(a: TruncOp) -> TruncOp:
    op = a.to_float()
    return TruncOp((op.entries + op.entries.conj().T) / 2, op.ctx, op.margin)


class EigenMethod(str, Enum):
    DENSE = "dense"
    POWER = "power"


def min_eigenvalue(
    a: TruncOp,
    *,
    method: EigenMethod | str = EigenMethod.DENSE,
    tol: float | None = None,
    max_iter: int | None = None,
) -> float:
    """Smallest eigenvalue of the Hermitian part.

    ``dense`` uses LAPACK (numpy.linalg.eigvalsh). ``power`` runs shifted power
    iteration on shift*I - H and stops once ||H v - lambda v|| <= tol * shift, so
    the returned value is within that residual of an eigenvalue.
    """
    try:
        method = EigenMethod(method)
    except ValueError as exc:
        raise TruncationError(f"Unknown eigenvalue method {method!r}; use 'dense' or 'power'.") from exc
    h = hermitian_part(a)
    if method is EigenMethod.DENSE:
        return float(np.linalg.eigvalsh(h.entries)[0])

    tol = h.ctx.tol_norm if tol is None else tol
    max_iter = h.ctx.power_max_iter if max_iter is None else max_iter
    shift = norm_upper_bound(h)
    if shift == 0:
        return 0.0
    negated = shift * np.eye(h.dim) - h.entries
    x = _start_vector(h.dim)
    estimate = math.nan
    for iteration in range(1, max_iter + 1):
        y = negated @ x
        estimate = float(np.vdot(x, y).real)
        residual = float(np.linalg.norm(y - estimate * x))
        if residual <= tol * shift:
            logger.debug("min_eigenvalue converged after %s iterations", iteration)
            return shift - estimate
        norm = np.linalg.norm(y)
        if norm == 0:
            return shift
        x = y / norm
    raise ConvergenceError(
        f"min_eigenvalue residual did not reach {tol:g} within {max_iter} iterations.",
        last_iterate=shift - estimate,
        iterations=max_iter,
    )


def neumann_inverse(
    a: TruncOp, coefficient: complex, *, tol: float | None = None, max_terms: int | None = None
) -> TruncOp:
    """(1 - c A)^{-1} as a finite Neumann series, valid while |c| ||A|| < 1."""
    op = a.to_float()
    tol = op.ctx.tol_quadrature if tol is None else tol
    ratio = abs(coefficient) * norm_upper_bound(op)
    if ratio >= 1:
        raise TruncationError(f"Neumann series needs |c| ||A|| < 1 (bound {ratio:.3g}).")
    terms = 1
    if ratio > 0:
        terms = max(1, int(math.ceil(math.log(tol * (1 - ratio)) / math.log(ratio))))
    if max_terms is not None:
        terms = min(terms, max_terms)
    degree_loss = op.dim - op.margin
    total = np.eye(op.dim, dtype=complex)
    power = np.eye(op.dim, dtype=complex)
    step = complex(coefficient) * op.entries
    for _ in range(terms):
        power = power @ step
        total = total + power
    margin = max(0, op.dim - terms * degree_loss)
    tail = ratio ** (terms + 1) / (1 - ratio)
    return TruncOp(total, op.ctx, margin, meta={"neumann_terms": terms, "tail_bound": tail})


# ----- structure checks -----
@dataclass(frozen=True)
class StructureReport:
    relation_residual: float
    jz_residual: float
    zbarz_residual: float
    shift_singular_values: list[float]
    largest_singular_value: float
    singular_values_decreasing: bool

    @property
    def passed(self) -> bool:
        return self.singular_values_decreasing

    def to_dict(self) -> Dict[str, Any]:
        return {
            "relation_residual": self.relation_residual,
            "jz_residual": self.jz_residual,
            "zbarz_residual": self.zbarz_residual,
            "largest_singular_value": self.largest_singular_value,
            "singular_values_decreasing": self.singular_values_decreasing,
            "shift_singular_values": self.shift_singular_values,
        }


def structure_checks(ctx: QContext, *, exact: bool = False) -> StructureReport:
    """Residuals of the defining relation and z zbar = 1 - j, zbar z = 1 - qj, plus the spectrum of U - V."""
    gens = build_generators(ctx, exact=exact)
    one = identity(ctx, exact=exact)
    q = ctx.q_exact if exact else ctx.q_float
    zbar_z = gens.zbar @ gens.z
    z_zbar = gens.z @ gens.zbar
    relation = zbar_z - z_zbar.scaled(q) - one.scaled(1 - q)
    relation_residual = _max_abs(relation.interior())
    jz_residual = interior_residual(z_zbar, one - gens.j)
    zbarz_residual = interior_residual(zbar_z, one - gens.j.scaled(q))

    size = ctx.trunc_dim
    shift = np.zeros((size, size))
    shift[np.arange(1, size), np.arange(size - 1)] = 1.0
    difference = build_generators(ctx).z.entries - shift
    singular = np.linalg.svd(difference, compute_uv=False)
    weights = np.abs(np.sqrt(1 - ctx.q_float ** np.arange(1, size)) - 1)
    decreasing = bool(np.all(np.diff(weights) <= 0))
    return StructureReport(
        relation_residual=float(relation_residual),
        jz_residual=float(jz_residual),
        zbarz_residual=float(zbarz_residual),
        shift_singular_values=[float(value) for value in singular],
        largest_singular_value=float(singular[0]),
        singular_values_decreasing=decreasing,
    )


# ----- serialization -----
def op_to_json(a: TruncOp) -> Dict[str, Any]:
    op = a.to_float()
    return {
        "q": str(op.ctx.q_exact),
        "N": op.dim,
        "margin": op.margin,
        "entries": [[float(value.real), float(value.imag)] for value in op.entries.ravel()],
    }


def op_from_json(payload: Mapping[str, Any], ctx: QContext | None = None) -> TruncOp:
    size = int(payload["N"])
    ctx = ctx or QContext(q_exact=str(payload["q"]), trunc_dim=size)
    if ctx.trunc_dim != size or str(ctx.q_exact) != str(payload["q"]):
        ctx = replace(ctx, q_exact=Fraction(str(payload["q"])), trunc_dim=size)
    pairs = np.asarray(payload["entries"], dtype=float)
    if pairs.shape != (size * size, 2):
        raise TruncationError(f"Expected {size * size} [re, im] pairs, got shape {pairs.shape}.")
    entries = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(size, size)
    return TruncOp(entries, ctx, int(payload["margin"]))


def save_op_binary(a: TruncOp, output_path: Path) -> Path:
    """16-byte header (N, margin as little-endian int64) followed by row-major float64 pairs."""
    op = a.to_float()
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with output_path.open("wb") as fp:
        fp.write(struct.pack("<qq", op.dim, op.margin))
        fp.write(op.entries.astype("<c16").tobytes(order="C"))
    return output_path


def load_op_binary(path: Path, ctx: QContext) -> TruncOp:
    data = path.read_bytes()
    size, margin = struct.unpack("<qq", data[:16])
    entries = np.frombuffer(data[16:], dtype="<c16")
    if entries.size != size * size:
        raise TruncationError(f"Binary dump holds {entries.size} entries, expected {size * size}.")
    return TruncOp(entries.reshape(size, size).astype(complex), ctx.with_dim(size), margin)


def save_op_json(a: TruncOp, output_path: Path) -> Path:
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(json.dumps(op_to_json(a)), encoding="utf-8")
    return output_path


def load_op_json(path: Path, ctx: Optional[QContext] = None) -> TruncOp:
    return op_from_json(json.loads(path.read_text(encoding="utf-8")), ctx)
