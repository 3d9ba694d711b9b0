"""Lax operators, the RLL relation, transfer matrices and conserved charges.

Conventions
-----------
* A Lax operator acts on ``a (x) n``: auxiliary space first, quantum site second.
* In the RLL relation slots 1 and 2 are auxiliary copies and slot 3 is the
  quantum site.
* The transfer matrix is ``t(u) = tr_a L_{aN}(u) ... L_{a1}(u)``; in the
  resulting ``2^N`` matrix site 1 is the most significant tensor factor.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .catalog import Bindings, SolutionRecord, default_catalog, instantiate, record_checksum
from .linalg import NullspaceInfo, svd_nullspace
from .series import MatrixSeries, SeriesBackend
from .tensor import as_complex, commutator_norm, embed, fit_scalar, perm
from .verify import DEFAULT_TOL, fcr_residual, regularity_check

__all__ = [
    "LaxOperator",
    "FcrSolutionSpace",
    "ChargeSet",
    "RllError",
    "lax_from_solution",
    "solve_fcr_space",
    "template_candidates",
    "rhat",
    "transfer_matrix",
    "transfer_series",
    "charges",
    "hamiltonian_density",
    "chain_operator",
    "cyclic_shift",
]

MAX_SITES = 8


class RllError(ValueError):
    pass


@dataclass
class LaxOperator:
    """``u -> L(u)`` on auxiliary (x) quantum space.

    ``series(order)`` returns the Taylor coefficients of ``L`` at ``u = 0``.
    """

    name: str
    eval: object
    series_fn: object = None
    record: SolutionRecord | None = None
    params: dict = field(default_factory=dict)
    bindings: Bindings | None = None
    source_bindings: Bindings | None = None
    tol: float = DEFAULT_TOL

    def __call__(self, u):
        return as_complex(self.eval(u))

    def series(self, order: int) -> MatrixSeries:
        if self.series_fn is None:
            raise RllError(f"{self.name}: no series expansion available")
        return self.series_fn(order)

    @property
    def regular(self) -> bool:
        _, dev = regularity_check(lambda u, v: self(0j), 0j)
        return dev <= self.tol

    @classmethod
    def from_coefficients(cls, coeffs, name="poly"):
        """Polynomial Lax operator ``sum_k coeffs[k] u^k``."""
        cs = [np.asarray(c, dtype=complex) for c in coeffs]

        def ev(u):
            return sum(c * complex(u) ** k for k, c in enumerate(cs))

        def ser(order):
            out = cs[:order + 1] + [np.zeros((4, 4), dtype=complex)] * max(0, order + 1 - len(cs))
            return MatrixSeries(out)

        return cls(name, ev, ser)

    @classmethod
    def from_callable(cls, fn, name="callable"):
        return cls(name, fn)


def default_bindings(rec: SolutionRecord, seed: int = 0, given: Bindings | None = None) -> Bindings:
    """Seeded random bindings for every free function of ``rec`` not in ``given``."""
    rng = random.Random(f"{seed}:{rec.id}")
    table = {n: Bindings.random_smooth(rng) for n in rec.free_fns
             if (given is None or n not in given) and n not in rec.source_map}
    return Bindings(table) | (given or Bindings())


def default_params(rec: SolutionRecord, seed: int = 0, given=None) -> dict:
    rng = random.Random(f"{seed}:{rec.id}:params")
    out = dict(given or {})
    for slot in rec.params:
        if slot not in out:
            r, t = rng.uniform(0.5, 1.5), rng.uniform(0, 2 * math.pi)
            out[slot] = complex(r * math.cos(t), r * math.sin(t))
    return out


def lax_from_solution(rec: SolutionRecord, bindings: Bindings | None = None, params=None,
                      source_bindings: Bindings | None = None, seed: int = 0) -> LaxOperator:
    """``L(u) = R(u, 0)``; unbound free functions get seeded random bindings."""
    b = default_bindings(rec, seed, bindings)
    p = default_params(rec, seed, params)
    sb = source_bindings
    if rec.source and sb is None:
        sb = default_bindings(default_catalog().get(rec.source), seed)

    def ev(u):
        return instantiate(rec, u, 0j, p, b, "f64", check=False, source_bindings=sb)

    def ser(order):
        be = SeriesBackend(order, "u")
        m = instantiate(rec, be.variable(0), be.const(0), p, b, be, check=False, source_bindings=sb)
        return MatrixSeries.from_entries(m, order)

    lax = LaxOperator(rec.id, ev, ser, rec, p, b, sb)
    try:
        lax(0.3 + 0.1j)
    except Exception as exc:
        raise RllError(f"{rec.id} cannot be instantiated at v=0: {exc}") from None
    return lax


# ---------------------------------------------------------------- FCR space

def rhat(R):
    """``(P R(v,u) P)^{-1}`` as an evaluable."""
    def Rh(u, v):
        P = perm()
        m = P @ as_complex(R(v, u)) @ P
        if abs(np.linalg.det(m)) < 1e-300:
            raise RllError("R(v,u) is singular")
        return np.linalg.inv(m)
    return Rh


@dataclass
class FcrSolutionSpace:
    u: complex
    v: complex
    basis: list
    info: NullspaceInfo
    matches: list = field(default_factory=list)   # (name, residual)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, X, tol=1e-9) -> bool:
        """Whether X lies in the span of the basis (relative projection error)."""
        x = as_complex(X).ravel()
        if not self.basis:
            return np.linalg.norm(x) == 0
        B = np.array([b.ravel() for b in self.basis]).T
        coef, *_ = np.linalg.lstsq(B, x, rcond=None)
        return np.linalg.norm(B @ coef - x) <= tol * max(1.0, np.linalg.norm(x))

    def to_json(self) -> dict:
        def c(z):
            return [float(f"{z.real:.12e}"), float(f"{z.imag:.12e}")]
        return {
            "u": c(complex(self.u)),
            "v": c(complex(self.v)),
            "dim": self.dim,
            "singular_values": [float(f"{s:.6e}") for s in self.info.singular_values],
            "gap": float(f"{self.info.gap:.6e}") if math.isfinite(self.info.gap) else "inf",
            "basis": [[[c(z) for z in row] for row in b] for b in self.basis],
            "matches": [{"template": n, "residual": float(f"{r:.6e}"), "member": r <= 1e-9}
                        for n, r in self.matches],
        }


def _fcr_map(L, u, v):
    lu, lv = L(u), L(v)
    A = embed(lu, (1, 3)) @ embed(lv, (2, 3))
    B = embed(lv, (2, 3)) @ embed(lu, (1, 3))
    cols = []
    for k in range(16):
        X = np.zeros((4, 4), dtype=complex)
        X.flat[k] = 1
        Xe = embed(X, (1, 2))
        cols.append((Xe @ A - B @ Xe).ravel())
    return np.array(cols).T


def template_candidates(lax: LaxOperator, u, v, seed: int = 0, catalog=None):
    """Named 4x4 candidates at (u, v): the source R, its hat, and the R-tilde templates."""
    out = []
    rec = lax.record
    if rec is None:
        return out
    cat = catalog or default_catalog()

    def R(a, b):
        return instantiate(rec, a, b, lax.params, lax.bindings, "f64", check=False,
                           source_bindings=lax.source_bindings)

    out.append((rec.id, lambda: R(u, v)))
    out.append((f"rhat({rec.id})", lambda: rhat(R)(u, v)))
    for t in cat.tilde_for(rec.id):
        tb = default_bindings(t, seed)

        def make(t=t, tb=tb):
            m = instantiate(t, u, v, lax.params, tb, "f64", check=False, source_bindings=lax.bindings)
            return m.T if t.extra.get("template_transform") == "transpose" else m
        out.append((t.id, make))
    return out


def solve_fcr_space(lax: LaxOperator, u, v, tau: float = 1e-10, match: bool = True,
                    seed: int = 0, catalog=None) -> FcrSolutionSpace:
    """Nullspace of X -> (X x 1) L13(u) L23(v) - L23(v) L13(u) (X x 1)."""
    M = _fcr_map(lax, u, v)
    basis, info = svd_nullspace(M, tau)
    mats = [np.asarray(b).reshape(4, 4) for b in basis]
    space = FcrSolutionSpace(complex(u), complex(v), mats, info)
    if match:
        for name, make in template_candidates(lax, u, v, seed, catalog):
            try:
                X = make()
                r = fcr_residual(X, lax, u, v)
            except Exception:
                r = float("inf")
            space.matches.append((name, r))
    return space


# ---------------------------------------------------------------- transfer matrices

def _check_sites(N):
    if not 1 <= N <= MAX_SITES:
        raise RllError(f"number of sites must be between 1 and {MAX_SITES}, got {N}")


def _ordered_product(coeffs, N, order):
    """Coefficients of L_{aN}...L_{a1} as tensors p[a', a, S', S] (series in u)."""
    Ls = [c.reshape(2, 2, 2, 2) for c in coeffs]       # [a', n', a, n]
    eye_a = np.eye(2, dtype=complex)
    # p_m has shape (2, 2, D, D) where D grows with the number of processed sites
    p = [eye_a.reshape(2, 2, 1, 1).astype(complex)] + [np.zeros((2, 2, 1, 1), dtype=complex)] * order
    for _ in range(N):
        new = []
        for m in range(order + 1):
            acc = None
            for j in range(m + 1):
                if j >= len(Ls):
                    break
                term = np.einsum("xybz,baST->xaSyTz", Ls[j], p[m - j])
                acc = term if acc is None else acc + term
            D = p[0].shape[2] * 2
            new.append(acc.reshape(2, 2, D, D))
        p = new
    return p


def transfer_series(lax: LaxOperator, N: int, order: int) -> list:
    """Taylor coefficients of t(u) at u = 0 (list of 2^N matrices)."""
    _check_sites(N)
    cs = lax.series(order).coeffs
    p = _ordered_product(cs, N, order)
    return [np.einsum("aaST->ST", x) for x in p]


def transfer_matrix(lax, N: int, u) -> np.ndarray:
    """t(u) = tr_a L_{aN}(u) ... L_{a1}(u)."""
    _check_sites(N)
    L = lax(u) if callable(lax) else np.asarray(lax)
    p = _ordered_product([as_complex(L)], N, 0)
    return np.einsum("aaST->ST", p[0])


def cyclic_shift(N: int) -> np.ndarray:
    """Operator sending |s1 s2 ... sN> to |sN s1 ... s_{N-1}>."""
    D = 2 ** N
    out = np.zeros((D, D), dtype=complex)
    for idx in range(D):
        bits = [(idx >> (N - 1 - k)) & 1 for k in range(N)]
        new = [bits[-1]] + bits[:-1]
        j = int("".join(map(str, new)), 2)
        out[j, idx] = 1
    return out


def chain_operator(h: np.ndarray, N: int) -> np.ndarray:
    """Periodic sum of a two-site density, sum_i h_{i,i+1} with site N+1 = site 1."""
    _check_sites(N)
    h = as_complex(h).reshape(2, 2, 2, 2)
    D = 2 ** N
    out = np.zeros((D, D), dtype=complex)
    for i in range(N):
        j = (i + 1) % N
        T = np.zeros((2,) * (2 * N), dtype=complex)
        # build h on sites (i, j) times identity elsewhere
        for idx in itertools.product(range(2), repeat=N):
            for a, b in itertools.product(range(2), repeat=2):
                out_idx = list(idx)
                val = h[a, b, idx[i], idx[j]]
                if val == 0:
                    continue
                out_idx[i], out_idx[j] = a, b
                T[tuple(out_idx) + idx] += val
        out += T.reshape(D, D)
    return out


# ---------------------------------------------------------------- charges

@dataclass
class ChargeSet:
    sites: int
    order: int
    t_coeffs: list                 # Q~_0..Q~_order
    q: dict                        # n -> Q_n (n >= 2) when log t is defined
    log_defined: bool
    flag: str = ""
    tilde_table: dict = field(default_factory=dict)
    q_table: dict = field(default_factory=dict)

    def max_tilde_commutator(self) -> float:
        return max(self.tilde_table.values(), default=0.0)

    def max_q_commutator(self) -> float:
        return max(self.q_table.values(), default=0.0)

    def to_json(self) -> dict:
        def fmt(x):
            return float(f"{x:.6e}")
        return {
            "sites": self.sites,
            "order": self.order,
            "log_defined": self.log_defined,
            "flag": self.flag,
            "tilde_norms": [fmt(np.linalg.norm(c)) for c in self.t_coeffs],
            "tilde_commutators": {f"{m},{n}": fmt(v) for (m, n), v in sorted(self.tilde_table.items())},
            "q_norms": {str(n): fmt(np.linalg.norm(c)) for n, c in sorted(self.q.items())},
            "q_commutators": {f"{m},{n}": fmt(v) for (m, n), v in sorted(self.q_table.items())},
            "max_tilde_commutator": fmt(self.max_tilde_commutator()),
            "max_q_commutator": fmt(self.max_q_commutator()),
        }


def charges(lax: LaxOperator, N: int, maxorder: int, cond_limit: float = 1e12) -> ChargeSet:
    """Q~_n from the Taylor series of t(u); Q_{n+1} = d^n/du^n log t(u) at 0 when t(0) is invertible."""
    coeffs = transfer_series(lax, N, maxorder)
    tilde = {}
    for m, n in itertools.combinations_with_replacement(range(maxorder + 1), 2):
        if m != n:
            tilde[(m, n)] = commutator_norm(coeffs[m], coeffs[n])
    t0 = coeffs[0]
    cond = np.linalg.cond(t0)
    q, qtab, defined, flag = {}, {}, False, ""
    if np.isfinite(cond) and cond < cond_limit:
        defined = True
        log = MatrixSeries(coeffs).log_nilpotent()
        for n in range(1, maxorder + 1):
            q[n + 1] = math.factorial(n) * log.coeffs[n]
        for m, n in itertools.combinations(sorted(q), 2):
            qtab[(m, n)] = commutator_norm(q[m], q[n])
    else:
        flag = "log-undefined (non-regular, possibly singular t(0))"
    return ChargeSet(N, maxorder, coeffs, q, defined, flag, tilde, qtab)


def hamiltonian_density(lax: LaxOperator, tol: float = DEFAULT_TOL) -> np.ndarray:
    """P L'(0) / c where L(0) = c P."""
    ser = lax.series(1)
    c, dev = fit_scalar(ser.coeffs[0], perm())
    if dev > tol or c == 0:
        raise RllError(f"{lax.name}: Lax operator is not regular (deviation {dev:.3e})")
    return perm() @ ser.coeffs[1] / c


def report_header(rec: SolutionRecord | None) -> dict:
    return {"record": rec.id, "checksum": record_checksum(rec)} if rec else {}
