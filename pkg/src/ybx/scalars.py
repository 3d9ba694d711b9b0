"""Scalar backends.

Three realizations of the scalar field are used throughout the package:

``f64``
    Python ``complex`` values; fast sampling.
``exact``
    :class:`GaussRat`, exact Gaussian rationals ``a + b*i`` with
    :class:`fractions.Fraction` parts.
``formal``
    Elements of the rational function field ``Q(x1, x2, p, q, k, s)`` where
    ``x1 = e^{u-v}`` and ``x2 = e^{v-w}``.  Spectral values are
    :class:`FormalPoint` objects and only ``exp`` of a zero-sum integer
    combination of them is representable.

A fourth, series-valued backend lives in :mod:`ybx.series`.
"""
from __future__ import annotations

import cmath
from fractions import Fraction
from numbers import Rational

import numpy as np
import sympy
from sympy.polys.domains import QQ

__all__ = [
    "GaussRat",
    "FormalPoint",
    "Backend",
    "F64",
    "Exact",
    "Formal",
    "EvaluationError",
    "SingularValue",
    "get_backend",
    "to_complex",
    "is_zero",
]


class EvaluationError(ValueError):
    """Raised when a value cannot be represented in the active backend."""


class SingularValue(EvaluationError):
    """Division by zero during evaluation (a pole of the expression)."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {x!r} to an exact rational")


class GaussRat:
    """Exact Gaussian rational ``re + im*i``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _frac(re)
        self.im = _frac(im)

    @staticmethod
    def coerce(x) -> "GaussRat":
        if isinstance(x, GaussRat):
            return x
        if isinstance(x, (int, Fraction, Rational)):
            return GaussRat(x)
        if isinstance(x, complex):
            if x.real.is_integer() and x.imag.is_integer():
                return GaussRat(int(x.real), int(x.imag))
        raise TypeError(f"cannot coerce {x!r} to GaussRat")

    def __add__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("GaussRat division by zero")
        return GaussRat((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return GaussRat(1) / (self ** (-n))
        out, base = GaussRat(1), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self):
        return GaussRat(self.re, -self.im)

    def __abs__(self):
        return abs(complex(self))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = GaussRat.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussRat({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*I"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*I)"


def _as_int(x):
    if isinstance(x, bool):
        return None
    if isinstance(x, int):
        return x
    if isinstance(x, FormalPoint):
        return None
    try:
        f = Fraction(str(x))
    except (ValueError, TypeError):
        return None
    return int(f) if f.denominator == 1 else None


class FormalPoint:
    """Integer linear combination of formal spectral points.

    ``exp`` of a point is only defined when the coefficients sum to zero,
    i.e. when it is a combination of differences such as ``u - v``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = {k: c for k, c in dict(coeffs).items() if c}

    def _combine(self, other, sign):
        if isinstance(other, FormalPoint):
            out = dict(self.coeffs)
            for k, c in other.coeffs.items():
                out[k] = out.get(k, 0) + sign * c
            return FormalPoint(out)
        if other == 0:
            return self
        raise EvaluationError("formal spectral values only combine with each other")

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self)._combine(other, 1)

    def __neg__(self):
        return FormalPoint({k: -c for k, c in self.coeffs.items()})

    def __mul__(self, other):
        n = _as_int(other)
        if n is None:
            raise EvaluationError("formal spectral values can only be scaled by integers")
        return FormalPoint({k: n * c for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        raise EvaluationError("formal spectral values cannot be divided")

    __rtruediv__ = __truediv__

    def __pow__(self, other):
        raise EvaluationError("formal spectral values cannot be raised to powers")

    def __eq__(self, other):
        if isinstance(other, FormalPoint):
            return self.coeffs == other.coeffs
        return other == 0 and not self.coeffs

    def __hash__(self):
        return hash(tuple(sorted(self.coeffs.items())))

    def __repr__(self):
        return f"FormalPoint({self.coeffs})"


class Backend:
    """Common interface used by the expression evaluator."""

    name = "abstract"

    def const(self, value):
        raise NotImplementedError

    def decimal(self, text: str):
        return self.const(Fraction(text))

    def exp(self, arg):
        raise NotImplementedError

    def param(self, name: str, value=None):
        if value is None:
            raise EvaluationError(f"unbound parameter {name!r}")
        return self.coerce(value)

    def coerce(self, value):
        return self.const(value)

    def matrix(self, rows) -> np.ndarray:
        return np.array([[self.coerce(x) for x in row] for row in rows], dtype=object)

    def eye(self, n: int) -> np.ndarray:
        out = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.const(1 if i == j else 0)
        return out


class F64(Backend):
    name = "f64"

    def const(self, value):
        if isinstance(value, Fraction):
            return complex(float(value))
        if isinstance(value, GaussRat):
            return complex(value)
        return complex(value)

    def decimal(self, text):
        return complex(float(text))

    def exp(self, arg):
        return cmath.exp(arg)

    def coerce(self, value):
        return self.const(value)

    def matrix(self, rows):
        return np.array([[complex(x) for x in row] for row in rows], dtype=complex)

    def eye(self, n):
        return np.eye(n, dtype=complex)


class Exact(Backend):
    name = "exact"

    def const(self, value):
        if isinstance(value, GaussRat):
            return value
        if isinstance(value, complex):
            raise EvaluationError("floating point value in exact backend")
        if isinstance(value, float):
            return GaussRat(Fraction(value).limit_denominator(10**12))
        return GaussRat(value)

    def exp(self, arg):
        if arg == 0:
            return GaussRat(1)
        raise EvaluationError("exp of a nonzero value is not an exact Gaussian rational")


_FORMAL_GENS = ("x1", "x2", "p", "q", "k", "s")


class Formal(Backend):
    """Rational functions in ``x1 = e^{u-v}``, ``x2 = e^{v-w}`` and the parameters.

    Points are labelled ``"u"``, ``"v"``, ``"w"``; ``w`` is the reference
    point so that ``e^{u} -> x1*x2``, ``e^{v} -> x2``, ``e^{w} -> 1``.
    """

    name = "formal"

    def __init__(self):
        self.field = QQ.frac_field(*sympy.symbols(_FORMAL_GENS))
        gens = dict(zip(_FORMAL_GENS, self.field.gens))
        self.gens = gens
        self._point_monomial = {
            "u": gens["x1"] * gens["x2"],
            "v": gens["x2"],
            "w": self.field.one,
        }

    def point(self, label: str) -> FormalPoint:
        if label not in self._point_monomial:
            raise EvaluationError(f"unknown formal point {label!r}")
        return FormalPoint({label: 1})

    def const(self, value):
        if isinstance(value, GaussRat):
            if value.im:
                raise EvaluationError("formal backend is real-rational")
            value = value.re
        if isinstance(value, (complex, float)):
            raise EvaluationError("floating point value in formal backend")
        f = _frac(value)
        return self.field(QQ(f.numerator, f.denominator))

    def coerce(self, value):
        if isinstance(value, type(self.field.one)):
            return value
        return self.const(value)

    def param(self, name, value=None):
        if value is None:
            if name in self.gens and name not in ("x1", "x2"):
                return self.gens[name]
            raise EvaluationError(f"unbound parameter {name!r}")
        return self.coerce(value)

    def exp(self, arg):
        if isinstance(arg, FormalPoint):
            if sum(arg.coeffs.values()) != 0:
                raise EvaluationError("formal exp requires a difference of spectral values")
            out = self.field.one
            for label, c in arg.coeffs.items():
                out = out * self._point_monomial[label] ** c
            return out
        if arg == 0:
            return self.field.one
        raise EvaluationError("formal exp is only defined on spectral differences")


_BACKENDS = {"f64": F64, "exact": Exact, "formal": Formal}


def get_backend(name) -> Backend:
    if isinstance(name, Backend):
        return name
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_BACKENDS)}") from None


def to_complex(x) -> complex:
    return complex(x)


def is_zero(x) -> bool:
    if isinstance(x, complex):
        return x == 0
    return not x
