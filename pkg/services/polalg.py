"""Exact symbolic engine for polynomials in z, z-bar on the quantum disk.

Elements are kept in normal order, sum c_{m,n} zbar^m z^n with the zbar powers
on the left. Products are reordered with the inverted defining relation
z zbar = q^{-1} (zbar z - (1 - q)), which in closed form reads

    z zbar^c = q^{-c} zbar^c z - q^{-c} (1 - q^c) zbar^{c-1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from services.gaussian import GaussianRational, ONE, ZERO
from services.qnum import QContext, parse_q, q_int

Monomial = Tuple[int, int]
Terms = Dict[Monomial, GaussianRational]


class PolynomialError(RuntimeError):
    """Raised when exact polynomial operations fail."""


class LaplacianOrder(str, Enum):
    DBAR_D = "dbar_d"  # zbar-derivative applied after the z-derivative
    D_DBAR = "d_dbar"


def _clean(terms: Mapping[Monomial, object]) -> Terms:
    cleaned: Terms = {}
    for (m, n), coefficient in terms.items():
        value = GaussianRational.coerce(coefficient)
        if m < 0 or n < 0:
            raise PolynomialError(f"Negative exponent in monomial zbar^{m} z^{n}.")
        if not value.is_zero:
            cleaned[(int(m), int(n))] = value
    return cleaned


def _accumulate(target: Terms, key: Monomial, value: GaussianRational) -> None:
    total = target.get(key, ZERO) + value
    if total.is_zero:
        target.pop(key, None)
    else:
        target[key] = total


@dataclass(frozen=True)
class NormalPoly:
    """Normal-ordered element sum c_{m,n} zbar^m z^n with Gaussian rational coefficients."""

    terms: Terms
    ctx: QContext

    def __post_init__(self) -> None:
        cleaned = _clean(self.terms)
        cap = self.ctx.degree_cap
        for m, n in cleaned:
            if m > cap or n > cap:
                raise PolynomialError(f"Monomial zbar^{m} z^{n} exceeds the degree cap {cap}.")
        object.__setattr__(self, "terms", cleaned)

    # --- constructors ---
    @classmethod
    def zero(cls, ctx: QContext) -> "NormalPoly":
        return cls({}, ctx)

    @classmethod
    def constant(cls, value: object, ctx: QContext) -> "NormalPoly":
        return cls({(0, 0): GaussianRational.coerce(value)}, ctx)

    @classmethod
    def monomial(cls, m: int, n: int, ctx: QContext, coefficient: object = 1) -> "NormalPoly":
        return cls({(m, n): GaussianRational.coerce(coefficient)}, ctx)

    @classmethod
    def z(cls, ctx: QContext) -> "NormalPoly":
        return cls.monomial(0, 1, ctx)

    @classmethod
    def zbar(cls, ctx: QContext) -> "NormalPoly":
        return cls.monomial(1, 0, ctx)

    # --- inspection ---
    @property
    def degree(self) -> int:
        """Total degree m + n of the highest monomial (0 for constants and zero)."""
        return max((m + n for m, n in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, m: int, n: int) -> GaussianRational:
        return self.terms.get((m, n), ZERO)

    def sorted_terms(self) -> list[tuple[Monomial, GaussianRational]]:
        return sorted(self.terms.items())

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (m, n), coefficient in self.sorted_terms():
            letters = []
            if m:
                letters.append("zbar" if m == 1 else f"zbar^{m}")
            if n:
                letters.append("z" if n == 1 else f"z^{n}")
            word = " ".join(letters)
            parts.append(f"{coefficient}*{word}" if word else str(coefficient))
        return " + ".join(parts)

    # --- arithmetic ---
    def _check_ctx(self, other: "NormalPoly") -> None:
        if other.ctx.q_exact != self.ctx.q_exact:
            raise PolynomialError(
                f"Polynomials live over different q ({self.ctx.q_exact} vs {other.ctx.q_exact})."
            )

    def __add__(self, other: object) -> "NormalPoly":
        if not isinstance(other, NormalPoly):
            other = NormalPoly.constant(other, self.ctx)
        self._check_ctx(other)
        result = dict(self.terms)
        for key, value in other.terms.items():
            _accumulate(result, key, value)
        return NormalPoly(result, self.ctx)

    __radd__ = __add__

    def __neg__(self) -> "NormalPoly":
        return NormalPoly({key: -value for key, value in self.terms.items()}, self.ctx)

    def __sub__(self, other: object) -> "NormalPoly":
        if not isinstance(other, NormalPoly):
            other = NormalPoly.constant(other, self.ctx)
        return self + (-other)

    def __rsub__(self, other: object) -> "NormalPoly":
        return (-self) + other

    def __mul__(self, other: object) -> "NormalPoly":
        if isinstance(other, NormalPoly):
            return normal_multiply(self, other)
        scale = GaussianRational.coerce(other)
        return NormalPoly({key: value * scale for key, value in self.terms.items()}, self.ctx)

    def __rmul__(self, other: object) -> "NormalPoly":
        scale = GaussianRational.coerce(other)
        return NormalPoly({key: scale * value for key, value in self.terms.items()}, self.ctx)

    def __pow__(self, exponent: int) -> "NormalPoly":
        if exponent < 0:
            raise PolynomialError("Negative powers are not polynomials.")
        result = NormalPoly.constant(1, self.ctx)
        for _ in range(exponent):
            result = normal_multiply(result, self)
        return result


# ----- BoundaryFunction -----
@dataclass(frozen=True)
class BoundaryFunction:
    """Function on the unit circle as finite Fourier data and/or angular samples."""

    fourier: Mapping[int, Any] = field(default_factory=dict)
    samples: Optional[Tuple[Tuple[float, complex], ...]] = None

    @property
    def bandwidth(self) -> int:
        return max((abs(d) for d in self.fourier), default=0)

    def coefficient(self, d: int) -> complex:
        return complex(self.fourier.get(d, 0))

    def evaluate(self, theta: Any) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        values = np.zeros(theta.shape, dtype=complex)
        for d in sorted(self.fourier):
            values = values + self.coefficient(d) * np.exp(1j * d * theta)
        return values

    def check_samples(self, tol: float) -> float:
        """Largest deviation between the samples and the Fourier sum; raises above ``tol``."""
        if not self.samples:
            return 0.0
        thetas = np.array([theta for theta, _ in self.samples], dtype=float)
        values = np.array([value for _, value in self.samples], dtype=complex)
        deviation = float(np.max(np.abs(self.evaluate(thetas) - values)))
        if deviation > tol:
            raise PolynomialError(
                f"Boundary samples disagree with Fourier data by {deviation:.3g} (tolerance {tol:g})."
            )
        return deviation

    @classmethod
    def from_samples(cls, thetas: Sequence[float], values: Sequence[complex], bandwidth: int) -> "BoundaryFunction":
        """Recover Fourier data from uniformly spaced samples with a declared bandwidth."""
        count = len(values)
        if count <= 2 * bandwidth:
            raise PolynomialError(f"{count} samples cannot resolve bandwidth {bandwidth}.")
        spectrum = np.fft.fft(np.asarray(values, dtype=complex)) / count
        fourier = {d: complex(spectrum[d % count]) for d in range(-bandwidth, bandwidth + 1)}
        samples = tuple((float(t), complex(v)) for t, v in zip(thetas, values))
        return cls(fourier={d: c for d, c in fourier.items() if c != 0}, samples=samples)

    def to_json(self) -> Dict[str, list]:
        return {
            str(d): [float(complex(value).real), float(complex(value).imag)]
            for d, value in sorted(self.fourier.items())
        }

    @classmethod
    def from_json(cls, payload: Mapping[str, Any]) -> "BoundaryFunction":
        fourier: Dict[int, complex] = {}
        for key, value in payload.items():
            try:
                d = int(key)
            except ValueError as exc:
                raise PolynomialError(f"Fourier keys must be integers, got {key!r}.") from exc
            if isinstance(value, (list, tuple)) and len(value) == 2:
                coefficient = complex(float(value[0]), float(value[1]))
            elif isinstance(value, (int, float)):
                coefficient = complex(value)
            else:
                raise PolynomialError(f"Fourier coefficient for d={d} must be [re, im].")
            if coefficient != 0:
                fourier[d] = coefficient
        return cls(fourier=fourier)

    def __add__(self, other: "BoundaryFunction") -> "BoundaryFunction":
        fourier: Dict[int, complex] = {d: self.coefficient(d) for d in self.fourier}
        for d in other.fourier:
            fourier[d] = fourier.get(d, 0) + other.coefficient(d)
        return BoundaryFunction(fourier={d: c for d, c in fourier.items() if c != 0})

    def scaled(self, factor: complex) -> "BoundaryFunction":
        return BoundaryFunction(fourier={d: factor * self.coefficient(d) for d in self.fourier})


def poisson_kernel_boundary(pole: complex, bandwidth: int) -> BoundaryFunction:
    """Fourier data of theta -> (1 - |a|^2) / |e^{i theta} - a|^2, truncated at ``bandwidth``."""
    if abs(pole) >= 1:
        raise PolynomialError("The Poisson kernel pole must lie inside the unit disk.")
    fourier: Dict[int, complex] = {0: 1.0 + 0j}
    for d in range(1, bandwidth + 1):
        fourier[d] = complex(pole).conjugate() ** d
        fourier[-d] = complex(pole) ** d
    return BoundaryFunction(fourier=fourier)


# ----- normal ordering -----
def _z_times(terms: Terms, q: Fraction) -> Terms:
    """Left-multiply a normal-ordered polynomial by z."""
    result: Terms = {}
    for (c, d), coefficient in terms.items():
        scale = q ** (-c)
        _accumulate(result, (c, d + 1), coefficient * scale)
        if c > 0:
            _accumulate(result, (c - 1, d), coefficient * (-scale * (1 - q**c)))
    return result


def normal_multiply(p: NormalPoly, r: NormalPoly) -> NormalPoly:
    """Exact product in normal order."""
    p._check_ctx(r)
    q = p.ctx.q_exact
    by_z_power: Dict[int, list[tuple[int, GaussianRational]]] = {}
    for (a, b), coefficient in p.terms.items():
        by_z_power.setdefault(b, []).append((a, coefficient))

    result: Terms = {}
    shifted: Terms = dict(r.terms)  # z^b * r for the current b
    for b in range(0, max(by_z_power, default=-1) + 1):
        if b > 0:
            shifted = _z_times(shifted, q)
        for a, coefficient in by_z_power.get(b, []):
            for (c, d), value in shifted.items():
                _accumulate(result, (c + a, d), coefficient * value)
    return NormalPoly(result, p.ctx)


def commutator(p: NormalPoly, r: NormalPoly) -> NormalPoly:
    return normal_multiply(p, r) - normal_multiply(r, p)


def adjoint(p: NormalPoly) -> NormalPoly:
    """(zbar^m z^n)^* = zbar^n z^m, which is already normal ordered."""
    return NormalPoly({(n, m): value.conjugate() for (m, n), value in p.terms.items()}, p.ctx)


def scale_J(p: NormalPoly) -> NormalPoly:
    """Apply J termwise: zbar^m z^n -> q^{m-n} zbar^m z^n."""
    q = p.ctx.q_exact
    return NormalPoly({(m, n): value * q ** (m - n) for (m, n), value in p.terms.items()}, p.ctx)


def partial(p: NormalPoly) -> NormalPoly:
    """d(zbar^m z^n) = q^{m-n+1} [n]_q zbar^m z^{n-1}."""
    q = p.ctx.q_exact
    result: Terms = {}
    for (m, n), value in p.terms.items():
        if n == 0:
            continue
        _accumulate(result, (m, n - 1), value * (q ** (m - n + 1) * q_int(n, p.ctx)))
    return NormalPoly(result, p.ctx)


def barpartial(p: NormalPoly) -> NormalPoly:
    """dbar(zbar^m z^n) = [m]_q zbar^{m-1} z^n."""
    result: Terms = {}
    for (m, n), value in p.terms.items():
        if m == 0:
            continue
        _accumulate(result, (m - 1, n), value * q_int(m, p.ctx))
    return NormalPoly(result, p.ctx)


def laplacian(p: NormalPoly, order: LaplacianOrder | str = LaplacianOrder.DBAR_D) -> NormalPoly:
    order = LaplacianOrder(order)
    if order is LaplacianOrder.DBAR_D:
        return barpartial(partial(p))
    return partial(barpartial(p))


def integrate(p: NormalPoly) -> GaussianRational:
    """Exact value of the trace state: only diagonal monomials contribute 1/[n+1]_q."""
    total = ZERO
    for (m, n), value in p.terms.items():
        if m == n:
            total = total + value / q_int(n + 1, p.ctx)
    return total


def symbol(p: NormalPoly) -> BoundaryFunction:
    """Boundary symbol: zbar^m z^n -> e^{i(n-m) theta}, with exact coefficients."""
    fourier: Dict[int, GaussianRational] = {}
    for (m, n), value in p.terms.items():
        d = n - m
        total = fourier.get(d, ZERO) + value
        if total.is_zero:
            fourier.pop(d, None)
        else:
            fourier[d] = total
    return BoundaryFunction(fourier=fourier)


@dataclass(frozen=True)
class GreenCheck:
    lhs: GaussianRational
    rhs: GaussianRational
    passed: bool


def green_check(p: NormalPoly) -> GreenCheck:
    """Compare the integral of dbar(p) with the contour integral of the symbol.

    For a trigonometric polynomial the contour integral (1/2 pi i) \\oint sigma dzeta is
    exactly the e^{-i theta} Fourier coefficient.
    """
    lhs = integrate(barpartial(p))
    rhs = GaussianRational.coerce(symbol(p).fourier.get(-1, ZERO))
    return GreenCheck(lhs=lhs, rhs=rhs, passed=lhs == rhs)


def evaluate_classical(p: NormalPoly, zeta: complex) -> complex:
    """Evaluate the commutative shadow sum c_{m,n} conj(zeta)^m zeta^n."""
    total = 0j
    for (m, n), value in p.terms.items():
        total += complex(value) * zeta.conjugate() ** m * zeta**n
    return total


def from_holomorphic(coefficients: Sequence[object], ctx: QContext, *, antiholomorphic: bool = False) -> NormalPoly:
    """Build sum c_d z^d (or sum c_d zbar^d) from a Taylor coefficient list."""
    terms: Dict[Monomial, object] = {}
    for d, value in enumerate(coefficients):
        terms[(d, 0) if antiholomorphic else (0, d)] = value
    return NormalPoly(terms, ctx)


def random_poly(
    rng: np.random.Generator,
    ctx: QContext,
    degree: int,
    *,
    max_terms: int = 6,
    complex_coefficients: bool = True,
) -> NormalPoly:
    """Random normal-ordered polynomial of total degree at most ``degree`` with small rational coefficients."""
    monomials = [(m, n) for m in range(degree + 1) for n in range(degree + 1 - m)]
    count = int(rng.integers(1, min(max_terms, len(monomials)) + 1))
    chosen = rng.choice(len(monomials), size=count, replace=False)
    terms: Dict[Monomial, GaussianRational] = {}
    for index in sorted(int(i) for i in chosen):
        re = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
        im = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) if complex_coefficients else Fraction(0)
        terms[monomials[index]] = GaussianRational(re, im)
    return NormalPoly(terms, ctx)


# ----- serialization -----
def poly_to_json(p: NormalPoly) -> Dict[str, Any]:
    return {
        "q": str(p.ctx.q_exact),
        "terms": [
            {"m": m, "n": n, "re": str(value.re), "im": str(value.im)}
            for (m, n), value in p.sorted_terms()
        ],
    }


def poly_from_json(payload: Mapping[str, Any], ctx: QContext | None = None) -> NormalPoly:
    """Parse the canonical JSON form; the stored q must match ``ctx`` when one is given."""
    try:
        q = parse_q(str(payload["q"]))
        raw_terms = payload["terms"]
    except (KeyError, TypeError) as exc:
        raise PolynomialError("Polynomial JSON needs 'q' and 'terms'.") from exc
    if ctx is None:
        ctx = QContext(q_exact=q)
    elif ctx.q_exact != q:
        raise PolynomialError(f"Polynomial was serialized at q={q}, context has q={ctx.q_exact}.")

    terms: Terms = {}
    for entry in raw_terms:
        try:
            key = (int(entry["m"]), int(entry["n"]))
            value = GaussianRational(Fraction(str(entry.get("re", "0"))), Fraction(str(entry.get("im", "0"))))
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise PolynomialError(f"Malformed polynomial term {entry!r}.") from exc
        _accumulate(terms, key, value)
    return NormalPoly(terms, ctx)


def dumps_poly(p: NormalPoly) -> str:
    return json.dumps(poly_to_json(p), sort_keys=True, separators=(",", ":"))


def loads_poly(text: str, ctx: QContext | None = None) -> NormalPoly:
    return poly_from_json(json.loads(text), ctx)


def parse_word(word: Iterable[str], ctx: QContext) -> NormalPoly:
    """Normal-order a word such as ["z", "zbar", "z"]."""
    result = NormalPoly.constant(ONE, ctx)
    letters = {"z": NormalPoly.z(ctx), "zbar": NormalPoly.zbar(ctx)}
    for letter in word:
        if letter not in letters:
            raise PolynomialError(f"Unknown generator {letter!r}; use 'z' or 'zbar'.")
        result = normal_multiply(result, letters[letter])
    return result
