"""Truncated power series in one or two variables, and matrix-valued series.

Coefficients may be any ring elements (complex, Fraction, GaussRat,
:class:`ybx.poly.MultiPoly`); products are truncated at total degree
``order``.
"""
from __future__ import annotations

import cmath
import itertools
from fractions import Fraction

import numpy as np

from .scalars import Backend, EvaluationError

__all__ = ["TruncatedSeries", "MatrixSeries", "SeriesBackend", "series_log", "series_exp"]


def _zero_like(c):
    return c - c


class TruncatedSeries:
    __slots__ = ("vars", "order", "coeffs")

    def __init__(self, vars, order: int, coeffs=None):
        self.vars = tuple(vars)
        if not 1 <= len(self.vars) <= 2:
            raise ValueError("series support one or two variables")
        self.order = int(order)
        self.coeffs = {}
        for k, c in (coeffs or {}).items():
            k = (k,) if isinstance(k, int) else tuple(k)
            if sum(k) <= self.order and c != 0:
                self.coeffs[k] = c

    # construction
    @classmethod
    def constant(cls, value, vars, order):
        return cls(vars, order, {(0,) * len(tuple(vars)): value})

    @classmethod
    def variable(cls, name, vars, order, one=1):
        vars = tuple(vars)
        k = tuple(int(v == name) for v in vars)
        return cls(vars, order, {k: one})

    @classmethod
    def from_list(cls, values, var="u", order=None):
        order = len(values) - 1 if order is None else order
        return cls((var,), order, {(i,): c for i, c in enumerate(values)})

    def coeff(self, *k):
        if len(k) == 1 and isinstance(k[0], tuple):
            k = k[0]
        return self.coeffs.get(tuple(k), 0)

    def to_list(self):
        if len(self.vars) != 1:
            raise ValueError("to_list is for univariate series")
        return [self.coeffs.get((i,), 0) for i in range(self.order + 1)]

    @property
    def const_term(self):
        return self.coeffs.get((0,) * len(self.vars), 0)

    def _like(self, coeffs):
        return TruncatedSeries(self.vars, self.order, coeffs)

    def _lift(self, other):
        if isinstance(other, TruncatedSeries):
            if other.vars != self.vars:
                raise ValueError(f"series variable mismatch {self.vars} vs {other.vars}")
            return other
        return TruncatedSeries.constant(other, self.vars, self.order)

    def _order_with(self, other):
        return min(self.order, other.order)

    # arithmetic
    def __add__(self, other):
        o = self._lift(other)
        out = dict(self.coeffs)
        for k, c in o.coeffs.items():
            out[k] = out[k] + c if k in out else c
        return TruncatedSeries(self.vars, self._order_with(o), out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -c for k, c in self.coeffs.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self._like({k: c * other for k, c in self.coeffs.items()})
        o = self._lift(other)
        order = self._order_with(o)
        out = {}
        for k1, c1 in self.coeffs.items():
            d1 = sum(k1)
            if d1 > order:
                continue
            for k2, c2 in o.coeffs.items():
                if d1 + sum(k2) > order:
                    continue
                k = tuple(a + b for a, b in zip(k1, k2))
                p = c1 * c2
                out[k] = out[k] + p if k in out else p
        return TruncatedSeries(self.vars, order, out)

    def __rmul__(self, other):
        return self._like({k: other * c for k, c in self.coeffs.items()})

    def _nilpotent_part(self):
        z = (0,) * len(self.vars)
        return self._like({k: c for k, c in self.coeffs.items() if k != z})

    def inverse(self):
        a0 = self.const_term
        if not a0:
            raise ZeroDivisionError("series with zero constant term is not invertible")
        inv0 = 1 / a0
        x = self._nilpotent_part() * inv0
        # 1/(a0 (1+x)) = inv0 * sum (-x)^k
        out = TruncatedSeries.constant(inv0, self.vars, self.order)
        term = TruncatedSeries.constant(inv0, self.vars, self.order)
        for _ in range(self.order):
            term = term * (-x)
            out = out + term
        return out

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.inverse()
        return self * (1 / other)

    def __rtruediv__(self, other):
        return self._lift(other) * self.inverse()

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        one = self.const_term ** 0 if self.coeffs else 1
        out = TruncatedSeries.constant(one, self.vars, self.order)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            other = self._lift(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return self.vars == other.vars and all(
            self.coeffs.get(k, 0) == other.coeffs.get(k, 0) for k in keys)

    def __bool__(self):
        return any(bool(c) for c in self.coeffs.values())

    def __hash__(self):
        return hash((self.vars, self.order, tuple(sorted(self.coeffs.items(), key=lambda kv: kv[0]))))

    def __complex__(self):
        if any(k != (0,) * len(self.vars) for k in self.coeffs):
            raise TypeError("only constant series convert to complex")
        return complex(self.const_term)

    def truncate(self, order):
        return TruncatedSeries(self.vars, min(order, self.order), self.coeffs)

    def evaluate(self, *point):
        total = 0
        for k, c in self.coeffs.items():
            m = c
            for x, e in zip(point, k):
                m = m * x ** e
            total = total + m
        return total

    def map(self, fn):
        return self._like({k: fn(c) for k, c in self.coeffs.items()})

    def __repr__(self):
        terms = " + ".join(f"{c}*{self.vars}^{k}" for k, c in sorted(self.coeffs.items()))
        return f"TruncatedSeries({terms or 0}; order={self.order})"


def _log_scalar(a0):
    if a0 == 1:
        return a0 - a0
    if isinstance(a0, (complex, float, int)) and not isinstance(a0, bool):
        return cmath.log(a0)
    raise EvaluationError("log of a non-unit exact constant term is not representable")


def series_log(a: TruncatedSeries) -> TruncatedSeries:
    """log a, for a with an invertible constant term (and plain scalar coefficients)."""
    a0 = a.const_term
    if not a0:
        raise ZeroDivisionError("series_log needs an invertible constant term")
    x = a._nilpotent_part() * (1 / a0)
    out = TruncatedSeries.constant(_log_scalar(a0), a.vars, a.order)
    power = x
    for k in range(1, a.order + 1):
        out = out + power * (Fraction((-1) ** (k + 1), k) if not isinstance(a0, complex) else (-1) ** (k + 1) / k)
        power = power * x
    return out


def series_exp(a: TruncatedSeries) -> TruncatedSeries:
    a0 = a.const_term
    if isinstance(a0, (complex, float)):
        e0 = cmath.exp(a0)
    elif not a0:
        e0 = 1
    else:
        raise EvaluationError("exp of a nonzero exact constant term is not representable")
    x = a._nilpotent_part()
    out = TruncatedSeries.constant(1, a.vars, a.order)
    term = TruncatedSeries.constant(1, a.vars, a.order)
    for k in range(1, a.order + 1):
        term = term * x * (Fraction(1, k) if not isinstance(a0, complex) else 1 / k)
        out = out + term
    return out * e0


class SeriesBackend(Backend):
    """Complex-coefficient univariate series in ``var``; used for charges."""

    name = "series"

    def __init__(self, order: int, var: str = "u"):
        self.order = order
        self.var = var

    def const(self, value):
        return TruncatedSeries.constant(complex(value), (self.var,), self.order)

    def decimal(self, text):
        return self.const(float(text))

    def variable(self, shift=0j):
        return TruncatedSeries((self.var,), self.order, {(0,): complex(shift), (1,): 1 + 0j})

    def exp(self, arg):
        if not isinstance(arg, TruncatedSeries):
            arg = self.const(arg)
        return series_exp(arg)

    def coerce(self, value):
        if isinstance(value, TruncatedSeries):
            return value
        return self.const(value)

    def matrix(self, rows):
        return np.array([[self.coerce(x) for x in row] for row in rows], dtype=object)


class MatrixSeries:
    """Univariate series with square-matrix coefficients ``sum_n C_n u^n``."""

    def __init__(self, coeffs):
        self.coeffs = [np.asarray(c) for c in coeffs]

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def dim(self):
        return self.coeffs[0].shape[0]

    @classmethod
    def from_entries(cls, m: np.ndarray, order: int):
        """Convert a matrix of univariate TruncatedSeries into a MatrixSeries."""
        n = m.shape[0]
        out = [np.zeros((n, n), dtype=complex) for _ in range(order + 1)]
        for i, j in itertools.product(range(n), repeat=2):
            e = m[i, j]
            if isinstance(e, TruncatedSeries):
                for d in range(order + 1):
                    out[d][i, j] = complex(e.coeffs.get((d,), 0))
            else:
                out[0][i, j] = complex(e)
        return cls(out)

    def __matmul__(self, other: "MatrixSeries"):
        order = min(self.order, other.order)
        out = []
        for n in range(order + 1):
            acc = self.coeffs[0] @ other.coeffs[n]
            for k in range(1, n + 1):
                acc = acc + self.coeffs[k] @ other.coeffs[n - k]
            out.append(acc)
        return MatrixSeries(out)

    def __add__(self, other):
        return MatrixSeries([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return MatrixSeries([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def scale(self, c):
        return MatrixSeries([c * a for a in self.coeffs])

    def log_nilpotent(self):
        """Non-constant part of log t, valid when all coefficients commute.

        With X = C_0^{-1}(t - C_0), returns sum_k (-1)^{k+1} X^k / k with the
        constant coefficient set to zero.
        """
        c0inv = np.linalg.inv(self.coeffs[0])
        x = MatrixSeries([np.zeros_like(self.coeffs[0])] + [c0inv @ c for c in self.coeffs[1:]])
        out = MatrixSeries([np.zeros_like(self.coeffs[0]) for _ in self.coeffs])
        power = x
        for k in range(1, self.order + 1):
            out = out + power.scale((-1) ** (k + 1) / k)
            power = power @ x
        return out
