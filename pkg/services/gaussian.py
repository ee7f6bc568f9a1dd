"""Exact Gaussian rationals: complex numbers with Fraction parts."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Scalar = Union[int, Fraction, "GaussianRational"]


class GaussianError(ValueError):
    """Raised when a value cannot be represented as a Gaussian rational."""


@dataclass(frozen=True, slots=True)
class GaussianRational:
    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def coerce(cls, value: object) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, bool):
            raise GaussianError("Booleans are not coefficients.")
        if isinstance(value, (int, Fraction)):
            return cls(Fraction(value))
        if isinstance(value, str):
            return cls(Fraction(value))
        if isinstance(value, (tuple, list)) and len(value) == 2:
            return cls(Fraction(value[0]), Fraction(value[1]))
        raise GaussianError(f"Cannot represent {value!r} exactly; pass ints, Fractions or (re, im) pairs.")

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __bool__(self) -> bool:
        return not self.is_zero

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __add__(self, other: object) -> "GaussianRational":
        try:
            rhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        return GaussianRational(self.re + rhs.re, self.im + rhs.im)

    __radd__ = __add__

    def __sub__(self, other: object) -> "GaussianRational":
        try:
            rhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        return GaussianRational(self.re - rhs.re, self.im - rhs.im)

    def __rsub__(self, other: object) -> "GaussianRational":
        try:
            lhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        return lhs - self

    def __mul__(self, other: object) -> "GaussianRational":
        try:
            rhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        return GaussianRational(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "GaussianRational":
        try:
            rhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        norm = rhs.re * rhs.re + rhs.im * rhs.im
        if norm == 0:
            raise ZeroDivisionError("Division by the zero Gaussian rational.")
        num = self * rhs.conjugate()
        return GaussianRational(num.re / norm, num.im / norm)

    def __rtruediv__(self, other: object) -> "GaussianRational":
        try:
            lhs = GaussianRational.coerce(other)
        except GaussianError:
            return NotImplemented
        return lhs / self

    def __eq__(self, other: object) -> bool:
        try:
            rhs = GaussianRational.coerce(other)
        except GaussianError:
            if isinstance(other, complex):
                return complex(self) == other
            return NotImplemented
        return self.re == rhs.re and self.im == rhs.im

    def __hash__(self) -> int:
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"

    def to_json(self) -> tuple[str, str]:
        return str(self.re), str(self.im)


ZERO = GaussianRational(Fraction(0))
ONE = GaussianRational(Fraction(1))
I = GaussianRational(Fraction(0), Fraction(1))
