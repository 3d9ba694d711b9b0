"""Solution catalog: records, free-function bindings and instantiation."""
from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .expr import Expr, evaluate, free_symbols, function_names, parse, to_text
from .scalars import EvaluationError, get_backend

__all__ = [
    "SolutionRecord",
    "Catalog",
    "Bindings",
    "ConstraintViolation",
    "load_catalog",
    "default_catalog",
    "catalog_list",
    "get_record",
    "instantiate",
    "record_checksum",
    "BUILTIN_RECORDS",
    "reduction_residual",
]

DATA_PATH = Path(__file__).with_name("data") / "catalog.json"
KINDS = ("constant", "spectral", "rll-tilde")


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class SolutionRecord:
    id: str
    kind: str
    rank: int
    matrix: tuple
    params: tuple = ()
    constraints: tuple = ()
    free_fns: tuple = ()
    citation: str = ""
    notes: str = ""
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def from_json(cls, d: dict) -> "SolutionRecord":
        known = {"id", "kind", "rank", "matrix", "params", "free_fns", "citation", "notes"}
        params = d.get("params", {})
        rec = cls(
            id=d["id"],
            kind=d["kind"],
            rank=int(d["rank"]),
            matrix=tuple(tuple(row) for row in d["matrix"]),
            params=tuple(params.get("slots", ())),
            constraints=tuple(params.get("constraints", ())),
            free_fns=tuple(d.get("free_fns", ())),
            citation=d.get("citation", ""),
            notes=d.get("notes", ""),
            extra={k: v for k, v in d.items() if k not in known},
        )
        rec.validate()
        return rec

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "kind": self.kind,
            "rank": self.rank,
            "params": {"slots": list(self.params), "constraints": list(self.constraints)},
            "matrix": [list(r) for r in self.matrix],
            "free_fns": list(self.free_fns),
            "citation": self.citation,
            "notes": self.notes,
        }
        out.update(self.extra)
        return out

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"{self.id}: unknown kind {self.kind!r}")
        if len(self.matrix) != 4 or any(len(r) != 4 for r in self.matrix):
            raise ValueError(f"{self.id}: matrix must be 4x4")
        if not 1 <= self.rank <= 4:
            raise ValueError(f"{self.id}: rank out of range")
        declared_fns = set(self.free_fns)
        for row in self.exprs:
            for e in row:
                missing = function_names(e) - declared_fns
                if missing:
                    raise ValueError(f"{self.id}: undeclared free functions {sorted(missing)}")
                params = free_symbols(e) - {"u", "v"}
                if params - set(self.params):
                    raise ValueError(f"{self.id}: undeclared parameters {sorted(params - set(self.params))}")

    @cached_property
    def exprs(self) -> tuple:
        return tuple(tuple(parse(t) for t in row) for row in self.matrix)

    @cached_property
    def constraint_exprs(self) -> tuple:
        return tuple(parse(t) for t in self.constraints)

    @property
    def source(self):
        return self.extra.get("source")

    @property
    def source_map(self) -> dict:
        return self.extra.get("source_map", {})

    @property
    def difference_form(self) -> bool:
        return bool(self.extra.get("difference_form", False))

    @property
    def branches(self) -> list:
        """Admissible parameter relations, each a map slot -> expression in the other slots."""
        return self.extra.get("branches", [])

    @property
    def reduces_to(self) -> dict | None:
        return self.extra.get("reduces_to")

    @property
    def family(self):
        return self.extra.get("family", self.id.split(".", 1)[-1])

    def display(self) -> str:
        cells = [[t if t != "0" else "." for t in row] for row in self.matrix]
        width = max(len(c) for row in cells for c in row)
        lines = [f"{self.id}  [{self.kind}, rank {self.rank}]  {self.citation}"]
        for row in cells:
            lines.append("  " + "  ".join(c.rjust(width) for c in row))
        if self.params:
            lines.append(f"  params: {', '.join(self.params)}")
        if self.constraints:
            lines.append(f"  nonzero: {', '.join(self.constraints)}")
        if self.free_fns:
            lines.append(f"  free functions: {', '.join(self.free_fns)}")
        if self.notes:
            lines.append(f"  notes: {self.notes}")
        return "\n".join(lines)


def _builtin(id_, rows, notes):
    return SolutionRecord(id=id_, kind="constant", rank=4, matrix=rows,
                          citation="builtin", notes=notes, extra={"builtin": True})


BUILTIN_RECORDS = {
    "const.P": _builtin("const.P", (("1", "0", "0", "0"), ("0", "0", "1", "0"),
                                    ("0", "1", "0", "0"), ("0", "0", "0", "1")),
                        "permutation operator; regular, kept outside the classified list"),
    "const.I": _builtin("const.I", (("1", "0", "0", "0"), ("0", "1", "0", "0"),
                                    ("0", "0", "1", "0"), ("0", "0", "0", "1")),
                        "identity"),
}


class Catalog:
    def __init__(self, records, path=None, raw=None):
        self.records = {}
        for r in records:
            if r.id in self.records or r.id in BUILTIN_RECORDS:
                raise ValueError(f"duplicate record id {r.id!r}")
            self.records[r.id] = r
        self.path = path
        self._raw = raw or {}

    def get(self, rid: str) -> SolutionRecord:
        if rid in self.records:
            return self.records[rid]
        if rid in BUILTIN_RECORDS:
            return BUILTIN_RECORDS[rid]
        raise KeyError(f"unknown record id {rid!r}")

    def __contains__(self, rid):
        return rid in self.records or rid in BUILTIN_RECORDS

    def list(self, kind=None, rank=None, include_builtin=False):
        pool = list(self.records.values())
        if include_builtin:
            pool += list(BUILTIN_RECORDS.values())
        out = [r for r in pool if (kind is None or r.kind == kind) and (rank is None or r.rank == rank)]
        return sorted(out, key=lambda r: r.id)

    def tilde_for(self, source_id: str):
        return [r for r in self.list(kind="rll-tilde")
                if r.source == source_id and not r.extra.get("alias_of")]

    def checksum(self, rid: str) -> str:
        return record_checksum(self.get(rid))


def record_checksum(rec: SolutionRecord) -> str:
    blob = json.dumps(rec.to_json(), sort_keys=True, ensure_ascii=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_catalog(path=None) -> Catalog:
    path = Path(path or os.environ.get("YBX_CATALOG") or DATA_PATH)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return Catalog([SolutionRecord.from_json(d) for d in data], path=path)


_DEFAULT = {}


def default_catalog() -> Catalog:
    key = os.environ.get("YBX_CATALOG") or str(DATA_PATH)
    if key not in _DEFAULT:
        _DEFAULT[key] = load_catalog(key)
    return _DEFAULT[key]


def catalog_list(kind=None, rank=None, catalog: Catalog | None = None):
    return (catalog or default_catalog()).list(kind=kind, rank=rank)


def get_record(rid: str, catalog: Catalog | None = None) -> SolutionRecord:
    return (catalog or default_catalog()).get(rid)


# ---------------------------------------------------------------- bindings


class Bindings:
    """Free-function bindings as expression text in the formal arguments u, v.

    ``Bindings({"f1": "exp(u-v)"})`` binds f1(x, y) to e^{x-y}.  A
    one-argument application such as ``f3(u)`` only binds ``u``.
    """

    def __init__(self, table=None):
        self.table = {}
        for name, text in (table or {}).items():
            self.table[name] = text if isinstance(text, Expr) else parse(str(text))

    def __contains__(self, name):
        return name in self.table

    def __or__(self, other: "Bindings") -> "Bindings":
        out = Bindings()
        out.table = {**self.table, **other.table}
        return out

    def text(self) -> dict:
        return {k: to_text(v) for k, v in sorted(self.table.items())}

    @classmethod
    def parse_assignments(cls, items) -> "Bindings":
        table = {}
        for item in items or ():
            for part in _split_top(item):
                name, sep, body = part.partition("=")
                if not sep:
                    raise ValueError(f"binding {part!r} is not of the form name=expr")
                table[name.strip()] = body.strip()
        return cls(table)

    # stock bindings
    @staticmethod
    def constant(value) -> str:
        return str(value)

    @staticmethod
    def exp_diff(alpha=1) -> str:
        return f"exp({alpha}*(u-v))" if alpha != 1 else "exp(u-v)"

    @staticmethod
    def rational_sample(a=1, b=2) -> str:
        return f"({a}+u)/({b}+v)"

    @staticmethod
    def random_smooth(rng: random.Random, difference_only=False, exact=False, formal=False) -> str:
        """Seeded random smooth function of (u, v).

        ``exact`` gives a polynomial (no exponentials); ``formal`` gives a
        Laurent polynomial in e^{u-v}, which the formal backend can represent.
        """
        def r():
            return Fraction(rng.randint(-9, 9) or 1, rng.randint(1, 5))

        def lit(x):
            return f"({x.numerator}/{x.denominator})" if x.denominator != 1 else f"({x.numerator})"

        if formal:
            return f"{lit(r())}+{lit(r())}*exp(u-v)+{lit(r())}*exp(2*(v-u))"
        if difference_only:
            return f"{lit(r())}+{lit(r())}*(u-v)+{lit(r())}*(u-v)^2"
        if exact:
            return f"{lit(r())}+{lit(r())}*u+{lit(r())}*v+{lit(r())}*u*v"
        return f"{lit(r())}+{lit(r())}*u+{lit(r())}*v+{lit(r())}*u*v+{lit(r())}*exp(u-v)"

    def callables(self, backend, params=None, extra_fns=None):
        out = dict(extra_fns or {})
        for name, e in self.table.items():
            out[name] = _binding_fn(e, backend, params, extra_fns)
        return out


def _binding_fn(e, backend, params, fns):
    def fn(args):
        env = {"u": args[0]}
        if len(args) > 1:
            env["v"] = args[1]
        return evaluate(e, backend, env, params, fns)
    return fn


def _split_top(text: str):
    """Split "f1=exp(u-v),g1=2" on commas that are outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur))
    return [p for p in (x.strip() for x in parts) if p]


def _coerce_params(backend, params):
    out = {}
    for k, v in (params or {}).items():
        if isinstance(v, str):
            v = evaluate(parse(v), backend, {}, {})
        out[k] = backend.coerce(v)
    return out


def source_functions(rec: SolutionRecord, backend, params, tilde_fns: Bindings | None,
                     source_bindings: Bindings | None):
    """Callables for a record, resolving tilde source maps through the source's bindings."""
    params = _coerce_params(backend, params)
    src = source_bindings.callables(backend, params) if source_bindings else {}
    fns = tilde_fns.callables(backend, params) if tilde_fns else {}
    for name, text in rec.source_map.items():
        if name in fns:
            continue
        fns[name] = _binding_fn(parse(text), backend, params, src)
    return fns


def check_constraints(rec: SolutionRecord, backend, params, fns=None, u=None, v=None, tol=1e-12):
    env = {}
    if u is not None:
        env["u"] = u
    if v is not None:
        env["v"] = v
    for text, e in zip(rec.constraints, rec.constraint_exprs):
        try:
            val = evaluate(e, backend, env, params, fns)
        except EvaluationError:
            continue
        zero = (abs(complex(val)) <= tol) if backend.name == "f64" else (not val)
        if zero:
            raise ConstraintViolation(f"{rec.id}: constraint {text} != 0 violated")
    if rec.branches and not any(_on_branch(b, backend, params, tol) for b in rec.branches):
        raise ConstraintViolation(f"{rec.id}: parameters lie on none of the branches "
                                  + "; ".join(",".join(f"{k}={t}" for k, t in b.items()) for b in rec.branches))


def _on_branch(branch, backend, params, tol):
    for slot, text in branch.items():
        if slot not in params:
            return True
        try:
            diff = params[slot] - evaluate(parse(text), backend, {}, params)
        except EvaluationError:
            return True
        if (abs(complex(diff)) > 1e-9 * max(1.0, abs(complex(params[slot])))) if backend.name == "f64" else bool(diff):
            return False
    return True


def instantiate(rec: SolutionRecord, u=None, v=None, params=None, fns=None,
                backend="f64", check=True, source_bindings=None) -> np.ndarray:
    """Evaluate a record to a 4x4 matrix.

    ``fns`` is a :class:`Bindings` (or a dict of callables).  For tilde
    records, functions named in the record's ``source_map`` are derived from
    ``source_bindings`` unless bound explicitly.
    """
    be = get_backend(backend)
    params = _coerce_params(be, params)
    if isinstance(fns, Bindings) or fns is None or source_bindings is not None:
        callables = source_functions(rec, be, params,
                                     fns if isinstance(fns, Bindings) else None, source_bindings)
        if isinstance(fns, dict):
            callables.update(fns)
    else:
        callables = dict(fns)
    if check:
        check_constraints(rec, be, params, callables, u, v)
    env = {}
    if u is not None:
        env["u"] = u
    if v is not None:
        env["v"] = v
    rows = [[evaluate(e, be, env, params, callables) for e in row] for row in rec.exprs]
    if be.name == "f64":
        return np.array(rows, dtype=complex)
    out = np.empty((4, 4), dtype=object)
    for i in range(4):
        for j in range(4):
            out[i, j] = be.coerce(rows[i][j])
    return out


_PERM4 = np.eye(4)[[0, 2, 1, 3]]


def reduction_residual(rec: SolutionRecord, u, params=None, fns: Bindings | None = None,
                       catalog: "Catalog | None" = None) -> float:
    """Compare R(u,u) with the constant record named in ``rec.reduces_to``.

    The stored reduction reads ``R(u,u) = scale * X(B C B^{-1})`` with
    ``B = Q x Q`` for the 2x2 ``basis`` Q, ``C`` the constant record at the
    mapped parameters and ``X`` one of ``id``, ``T``, ``P``, ``PT``.
    ``roots`` binds auxiliary function names to principal square roots.
    Evaluated in floating point.
    """
    red = rec.reduces_to
    if not red:
        raise ValueError(f"{rec.id} has no reduction")
    cat = catalog or default_catalog()
    be = get_backend("f64")
    params = _coerce_params(be, params)
    fnc = source_functions(rec, be, params, fns, None)
    for name, text in red.get("roots", {}).items():
        e = parse(text)
        fnc[name] = (lambda e: lambda args: complex(np.sqrt(complex(evaluate(
            e, be, {"u": args[0], "v": args[-1]}, params, fnc)))))(e)
    env = {"u": u, "v": u}

    def ev(text):
        return complex(evaluate(parse(text), be, env, params, fnc))

    target = instantiate(rec, u, u, params, fnc, be, check=False)
    const = cat.get(red["id"])
    cparams = {k: ev(t) for k, t in red.get("params", {}).items()}
    cm = instantiate(const, params=cparams, backend=be, check=False)
    q = np.array([[ev(t) for t in row] for row in red.get("basis", [["1", "0"], ["0", "1"]])])
    B = np.kron(q, q)
    m = B @ cm @ np.linalg.inv(B)
    m = {"id": m, "T": m.T, "P": _PERM4 @ m @ _PERM4, "PT": (_PERM4 @ m @ _PERM4).T}[red.get("transform", "id")]
    m = ev(red.get("scale", "1")) * m
    return float(np.linalg.norm(m - target) / max(1.0, np.linalg.norm(target)))
