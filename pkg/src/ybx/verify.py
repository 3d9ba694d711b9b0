"""Residual evaluation for the Yang-Baxter family of relations.

Every check works on an *evaluable*: a callable ``R(u, v)`` returning a 4x4
array in one backend.  :func:`record_evaluable` turns a catalog record plus
parameter values and function bindings into one.

Sampling is driven by :class:`SamplePlan`.  Draws are counter-mode: sample
``i`` at attempt ``j`` uses ``numpy.random.default_rng([seed, i, j])``, so a
report never depends on evaluation order.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .catalog import (
    Bindings,
    ConstraintViolation,
    SolutionRecord,
    default_catalog,
    instantiate,
    record_checksum,
)
from .expr import evaluate, parse
from .scalars import GaussRat, SingularValue, get_backend
from .tensor import (
    as_complex,
    embed,
    fit_scalar,
    identity,
    inverse,
    kron,
    perm,
    rel_residual,
)

__all__ = [
    "SamplingError",
    "Sample",
    "SamplePlan",
    "ResidualReport",
    "ModifiedYBE",
    "record_evaluable",
    "constant_evaluable",
    "ybe_residual",
    "constant_ybe_residual",
    "braiding_check",
    "regularity_check",
    "fcr_residual",
    "hexagon_operator",
    "modified_ybe_factor",
    "similarity_transform",
    "scaled",
    "unitarized",
    "cocycle_residual",
    "verify_functional",
    "formal_ybe_identity",
    "RELATIONS",
    "run_relation",
]

DEFAULT_TOL = 1e-9

# failures that mean "this sample sits on an excluded locus", not "the check failed"
_REJECT = (ConstraintViolation, SingularValue, ZeroDivisionError, np.linalg.LinAlgError)


class SamplingError(RuntimeError):
    pass


# ---------------------------------------------------------------- evaluables

def record_evaluable(rec: SolutionRecord, params=None, fns=None, backend="f64",
                     source_bindings=None, check=True):
    """``R(u, v)`` for a catalog record; constant records ignore their arguments."""
    be = get_backend(backend)
    fixed = {}

    def R(u=None, v=None):
        if rec.kind == "constant":
            if "m" not in fixed:
                fixed["m"] = instantiate(rec, None, None, params, fns, be, check, source_bindings)
            return fixed["m"]
        return instantiate(rec, u, v, params, fns, be, check, source_bindings)

    R.record = rec
    return R


def constant_evaluable(m: np.ndarray):
    def R(u=None, v=None):
        return m
    return R


def scaled(R, c):
    return lambda u, v: R(u, v) * c


def similarity_transform(R, Q: np.ndarray):
    """``(Q x Q) R(u,v) (Q x Q)^{-1}``."""
    Q = np.asarray(Q)
    if Q.dtype != object:
        Q = Q.astype(complex)
        if abs(np.linalg.det(Q)) < 1e-14:
            raise ValueError("similarity transform needs an invertible Q")
    QQ = kron(Q, Q)
    QQi = inverse(QQ)
    return lambda u, v: QQ @ R(u, v) @ QQi


def _order_key(z):
    z = complex(z)
    return (z.real, z.imag)


def unitarized(R):
    """Rescale a braiding-unitary R so that R21(v,u) R12(u,v) = 1 exactly.

    The scalar is evaluated on the canonically ordered pair so that the same
    square root is used for R(u,v) and R(v,u).
    """
    def Rn(u, v):
        a, b = (u, v) if _order_key(u) <= _order_key(v) else (v, u)
        c, _ = braiding_check(R, a, b)
        return as_complex(R(u, v)) / np.sqrt(c)
    return Rn


# ---------------------------------------------------------------- relations

def _ybe_sides(R, u, v, w):
    r12, r13, r23 = R(u, v), R(u, w), R(v, w)
    a, b, c = embed(r12, (1, 2)), embed(r13, (1, 3)), embed(r23, (2, 3))
    return a @ b @ c, c @ b @ a


def ybe_residual(R, u, v, w) -> float:
    lhs, rhs = _ybe_sides(R, u, v, w)
    return rel_residual(lhs, rhs)


def constant_ybe_residual(m: np.ndarray) -> float:
    a, b, c = embed(m, (1, 2)), embed(m, (1, 3)), embed(m, (2, 3))
    return rel_residual(a @ b @ c, c @ b @ a)


def braiding_check(R, u, v) -> tuple[complex, float]:
    """Fit P R(v,u) P R(u,v) ~ c * 1."""
    P = perm(R(u, v))
    prod = P @ R(v, u) @ P @ R(u, v)
    return fit_scalar(prod, identity(4))


def regularity_check(R, u) -> tuple[complex, float]:
    """Fit R(u,u) ~ c * P; a vanishing R(u,u) is not regular (deviation 1)."""
    c, dev = fit_scalar(R(u, u), perm())
    return (c, dev) if c != 0 else (c, 1.0)


def fcr_residual(X: np.ndarray, L, u, v) -> float:
    """Residual of (X x 1) L13(u) L23(v) = L23(v) L13(u) (X x 1); slot 3 is the quantum site."""
    lu, lv = L(u), L(v)
    Xe = embed(X, (1, 2))
    a, b = embed(lu, (1, 3)), embed(lv, (2, 3))
    return rel_residual(Xe @ a @ b, b @ a @ Xe)


def hexagon_operator(R, u, v, w) -> np.ndarray:
    """R32(w,v) R31(w,u) R21(v,u) R23(v,w) R13(u,w) R12(u,v)."""
    return (embed(R(w, v), (3, 2)) @ embed(R(w, u), (3, 1)) @ embed(R(v, u), (2, 1))
            @ embed(R(v, w), (2, 3)) @ embed(R(u, w), (1, 3)) @ embed(R(u, v), (1, 2)))


@dataclass
class ModifiedYBE:
    form: str  # "multiplicative" or "additive"
    matrix: np.ndarray
    scalar: complex | None
    deviation: float
    condition: float


def modified_ybe_factor(R, u, v, w, tol=DEFAULT_TOL, max_condition=1e12) -> ModifiedYBE:
    """M with R12 R13 R23 = M R23 R13 R12, or the difference when the right side is singular."""
    lhs, rhs = _ybe_sides(R, u, v, w)
    lhs, rhs = as_complex(lhs), as_complex(rhs)
    cond = float(np.linalg.cond(rhs))
    if np.isfinite(cond) and cond <= max_condition:
        M = lhs @ np.linalg.inv(rhs)
        c, dev = fit_scalar(M, np.eye(8))
        return ModifiedYBE("multiplicative", M, c if dev <= tol else None, dev, cond)
    M = lhs - rhs
    scale = max(1.0, np.linalg.norm(lhs), np.linalg.norm(rhs))
    dev = float(np.linalg.norm(M) / scale)
    return ModifiedYBE("additive", M, 0j if dev <= tol else None, dev, cond)


def cocycle_residual(f, u, v, w) -> float:
    """|f(u,w) - f(u,v) f(v,w)| relative to max(1, |f(u,w)|, |f(u,v) f(v,w)|)."""
    a = complex(f(u, w))
    b = complex(f(u, v)) * complex(f(v, w))
    return abs(a - b) / max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class Sample:
    index: int
    points: tuple
    params: dict
    bindings: Bindings
    source_bindings: Bindings | None


def _draw_point(rng, backend_name):
    if backend_name == "exact":
        while True:
            re, im = (Fraction(int(x), 10) for x in rng.integers(-15, 16, size=2))
            if Fraction(1, 4) <= re * re + im * im <= Fraction(9, 4):
                return GaussRat(re, im)
    r = rng.uniform(0.5, 1.5)
    t = rng.uniform(0.0, 2 * math.pi)
    return complex(r * math.cos(t), r * math.sin(t))


def _random_binding(rng, backend_name, difference_only=False):
    sub = random.Random(int(rng.integers(2**62)))
    if backend_name == "formal":
        return Bindings.random_smooth(sub, formal=True)
    return Bindings.random_smooth(sub, difference_only=difference_only, exact=backend_name == "exact")


@dataclass(frozen=True)
class SamplePlan:
    """Seeded draws of spectral points, parameters and free-function bindings."""

    seed: int = 0
    count: int = 20
    backend: str = "f64"
    min_separation: float = 0.05
    max_rejections: int = 1000

    def draw(self, index: int, attempt: int, rec: SolutionRecord | None = None, arity: int = 3,
             params=None, bindings: Bindings | None = None, source_bindings: Bindings | None = None,
             separated: bool = True) -> Sample:
        rng = np.random.default_rng([self.seed, index, attempt])
        if self.backend == "formal":
            be = get_backend("formal")
            pts = tuple(be.point(x) for x in "uvw"[:arity])
        else:
            pts = tuple(_draw_point(rng, self.backend) for _ in range(arity))
            if separated and arity > 1:
                for i in range(arity):
                    for j in range(i + 1, arity):
                        if abs(complex(pts[i]) - complex(pts[j])) < self.min_separation:
                            raise _Reject("points too close")
        out_params = dict(params or {})
        out_b, out_sb = bindings or Bindings(), source_bindings
        if rec is not None:
            branch = {}
            if rec.branches and self.backend != "formal":
                branch = rec.branches[int(rng.integers(len(rec.branches)))]
            for slot in rec.params:
                if slot not in out_params and slot not in branch and self.backend != "formal":
                    out_params[slot] = _draw_point(rng, self.backend)
            be = get_backend(self.backend) if branch else None
            for slot, text in branch.items():
                if slot not in out_params:
                    out_params[slot] = evaluate(parse(text), be, {}, out_params)
            table = {}
            for name in rec.free_fns:
                if name not in out_b and name not in rec.source_map:
                    table[name] = _random_binding(rng, self.backend)
            out_b = Bindings(table) | out_b
            if rec.source:
                src = default_catalog().get(rec.source)
                stable = {name: _random_binding(rng, self.backend) for name in src.free_fns}
                out_sb = Bindings(stable) | (source_bindings or Bindings())
        return Sample(index, pts, out_params, out_b, out_sb)

    def run(self, fn, rec=None, arity=3, params=None, bindings=None, source_bindings=None,
            separated=True):
        """Evaluate ``fn(sample)`` on ``count`` accepted samples.

        Samples where evaluation hits an excluded locus (constraint or pole)
        are redrawn; more than ``max_rejections`` redraws in total is an error.
        """
        count = 1 if self.backend == "formal" else self.count
        results, rejections = [], 0
        for i in range(count):
            attempt = 0
            while True:
                try:
                    s = self.draw(i, attempt, rec, arity, params, bindings, source_bindings, separated)
                    results.append((s, fn(s)))
                    break
                except (_Reject,) + _REJECT:
                    rejections += 1
                    attempt += 1
                    if rejections > self.max_rejections:
                        raise SamplingError(
                            f"more than {self.max_rejections} rejected samples; "
                            "the admissible region may be empty") from None
        return results, rejections


class _Reject(Exception):
    pass


# ---------------------------------------------------------------- reports

def _num(x):
    if isinstance(x, complex):
        return [_num(x.real), _num(x.imag)]
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return str(x)
    return float(f"{x:.12e}")


@dataclass
class ResidualReport:
    relation: str
    record: str | None
    backend: str
    seed: int
    tol: float
    residuals: list
    scalars: list = field(default_factory=list)
    rejections: int = 0
    checksum: str | None = None
    notes: list = field(default_factory=list)

    @property
    def max(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    @property
    def passed(self) -> bool:
        return self.max <= self.tol

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        out = {
            "relation": self.relation,
            "record": self.record,
            "backend": self.backend,
            "seed": self.seed,
            "samples": len(self.residuals),
            "rejections": self.rejections,
            "tol": self.tol,
            "max": _num(self.max),
            "verdict": self.verdict,
            "residuals": [_num(r) for r in self.residuals],
        }
        if self.scalars:
            out["scalars"] = [_num(complex(c)) if c is not None else None for c in self.scalars]
        if self.checksum:
            out["checksum"] = self.checksum
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


# ---------------------------------------------------------------- formal identities

def formal_ybe_identity(rec: SolutionRecord, params=None) -> bool:
    """YBE as an identity in x1 = e^{u-v}, x2 = e^{v-w} (and symbolic parameters)."""
    be = get_backend("formal")
    R = record_evaluable(rec, params, None, be, check=False)
    u, v, w = (be.point(x) for x in "uvw")
    lhs, rhs = _ybe_sides(R, u, v, w)
    diff = lhs - rhs
    return all(not x for x in diff.flat)


# ---------------------------------------------------------------- drivers

def _eval_for(rec, s: Sample, backend):
    return record_evaluable(rec, s.params, s.bindings, backend, s.source_bindings)


def _rel_ybe(rec, s, backend):
    R = _eval_for(rec, s, backend)
    return ybe_residual(R, *s.points), None


def _rel_constant(rec, s, backend):
    R = _eval_for(rec, s, backend)
    return constant_ybe_residual(R(s.points[0], s.points[0])), None


def _rel_braiding(rec, s, backend):
    c, dev = braiding_check(_eval_for(rec, s, backend), *s.points[:2])
    return dev, c


def _rel_regularity(rec, s, backend):
    c, dev = regularity_check(_eval_for(rec, s, backend), s.points[0])
    return dev, c


def _rel_fcr(rec, s, backend):
    R = _eval_for(rec, s, backend)
    zero = get_backend(backend).const(0)
    u, v = s.points[:2]
    return fcr_residual(R(u, v), lambda x: R(x, zero), u, v), None


def _rel_modified(rec, s, backend):
    m = modified_ybe_factor(_eval_for(rec, s, backend), *s.points)
    return m.deviation, m.scalar


RELATIONS = {
    "ybe": (_rel_ybe, 3, True),
    "constant-ybe": (_rel_constant, 1, False),
    "braiding": (_rel_braiding, 2, True),
    "regularity": (_rel_regularity, 1, False),
    "fcr": (_rel_fcr, 2, True),
    "modified-ybe": (_rel_modified, 3, True),
}


def run_relation(relation: str, rec: SolutionRecord, plan: SamplePlan, params=None,
                 bindings: Bindings | None = None, source_bindings: Bindings | None = None,
                 tol: float = DEFAULT_TOL) -> ResidualReport:
    """Evaluate ``relation`` for ``rec`` over the samples of ``plan``."""
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}; expected one of {sorted(RELATIONS)}")
    fn, arity, separated = RELATIONS[relation]
    if relation == "constant-ybe" and rec.kind != "constant":
        raise ValueError(f"{rec.id} is not a constant record")
    notes = []
    backend = plan.backend
    if backend == "formal" and relation not in ("ybe", "constant-ybe"):
        raise ValueError("the formal backend only supports ybe and constant-ybe")
    if backend == "formal" and relation == "ybe":
        ok = formal_ybe_identity(rec, params)
        notes.append("identity in x1=e^(u-v), x2=e^(v-w) with symbolic parameters")
        return ResidualReport(relation, rec.id, backend, plan.seed, tol, [0.0 if ok else math.inf],
                              checksum=record_checksum(rec), notes=notes)
    results, rejections = plan.run(lambda s: fn(rec, s, backend), rec, arity, params,
                                   bindings, source_bindings, separated)
    residuals = [r for _, (r, _) in results]
    scalars = [c for _, (_, c) in results] if relation in ("braiding", "regularity", "modified-ybe") else []
    return ResidualReport(relation, rec.id, backend, plan.seed, tol, residuals, scalars,
                          rejections, record_checksum(rec), notes)


def verify_functional(f, plan: SamplePlan | None = None, tol: float = DEFAULT_TOL) -> ResidualReport:
    """Check the multiplicative cocycle relation f(u,w) = f(u,v) f(v,w) at sampled triples."""
    plan = plan or SamplePlan()
    results, rejections = plan.run(lambda s: cocycle_residual(f, *s.points))
    return ResidualReport("cocycle", None, plan.backend, plan.seed, tol,
                          [r for _, r in results], rejections=rejections)
