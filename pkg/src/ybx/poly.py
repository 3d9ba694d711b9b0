"""Sparse multivariate polynomials with exact coefficients.

Used by the lifter for inhomogeneous terms and nonlinear constraints.
Factorization is delegated to sympy.
"""
from __future__ import annotations

from fractions import Fraction

import sympy

__all__ = ["MultiPoly", "var"]

Monomial = tuple  # sorted tuple of (name, exponent)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def _coerce_coeff(c):
    if isinstance(c, int):
        return Fraction(c)
    return c


class MultiPoly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        for m, c in (terms or {}).items():
            c = _coerce_coeff(c)
            if c:
                self.terms[m] = self.terms.get(m, 0) + c if m in self.terms else c
        self.terms = {m: c for m, c in self.terms.items() if c}

    @classmethod
    def const(cls, c):
        return cls({(): c})

    @classmethod
    def var(cls, name):
        return cls({((name, 1),): Fraction(1)})

    def _lift(self, other):
        if isinstance(other, MultiPoly):
            return other
        return MultiPoly.const(other)

    def __add__(self, other):
        o = self._lift(other)
        out = dict(self.terms)
        for m, c in o.terms.items():
            out[m] = out[m] + c if m in out else c
        return MultiPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            other = _coerce_coeff(other)
            return MultiPoly({m: c * other for m, c in self.terms.items()})
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                p = c1 * c2
                out[m] = out[m] + p if m in out else p
        return MultiPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, MultiPoly):
            if other.is_constant():
                other = other.constant_term()
            else:
                raise ZeroDivisionError("polynomial division by a non-constant")
        return self * (1 / _coerce_coeff(other))

    def __pow__(self, n):
        out = MultiPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.const(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_constant(self):
        return all(m == () for m in self.terms)

    def constant_term(self):
        return self.terms.get((), Fraction(0))

    def variables(self):
        return sorted({v for m in self.terms for v, _ in m})

    def degree(self):
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def linear_part(self):
        return {m[0][0]: c for m, c in self.terms.items() if len(m) == 1 and m[0][1] == 1}

    def subs(self, mapping):
        """Substitute variables by polynomials or scalars."""
        out = MultiPoly()
        for m, c in self.terms.items():
            t = MultiPoly.const(c)
            for v, e in m:
                if v in mapping:
                    t = t * (MultiPoly.const(1) * mapping[v]) ** e
                else:
                    t = t * MultiPoly({((v, e),): 1})
            out = out + t
        return out

    def support(self):
        return [frozenset(v for v, _ in m) for m in self.terms]

    def to_sympy(self):
        expr = sympy.Integer(0)
        for m, c in self.terms.items():
            t = sympy.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else sympy.sympify(str(c))
            for v, e in m:
                t = t * sympy.Symbol(v) ** e
            expr += t
        return expr

    @classmethod
    def from_sympy(cls, expr):
        expr = sympy.expand(expr)
        gens = sorted(expr.free_symbols, key=lambda s: s.name)
        if not gens:
            r = sympy.Rational(expr)
            return cls.const(Fraction(int(r.p), int(r.q)))
        poly = sympy.Poly(expr, *gens)
        out = {}
        for exps, c in poly.terms():
            r = sympy.Rational(c)
            m = tuple(sorted((g.name, e) for g, e in zip(gens, exps) if e))
            out[m] = Fraction(int(r.p), int(r.q))
        return cls(out)

    def factors(self):
        """Irreducible factors over Q (constants dropped, multiplicities ignored)."""
        if self.is_constant():
            return []
        _, facs = sympy.factor_list(self.to_sympy())
        return [MultiPoly.from_sympy(f) for f, _ in facs]

    def normalized(self):
        """Scale so the leading coefficient (in sorted monomial order) is 1."""
        if not self.terms:
            return self
        lead = min(self.terms, key=_mono_key)
        return self * (1 / self.terms[lead])

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=_mono_key):
            c = self.terms[m]
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not mono:
                parts.append(f"({c})" if c < 0 else str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def _mono_key(m):
    return (-sum(e for _, e in m), m)


def var(name: str) -> MultiPoly:
    return MultiPoly.var(name)
