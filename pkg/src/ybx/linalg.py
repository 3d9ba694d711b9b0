"""Linear systems: exact Gauss-Jordan elimination and SVD nullspaces."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

__all__ = [
    "LinearSystem",
    "Solution",
    "rref",
    "exact_nullspace",
    "svd_nullspace",
    "NullspaceInfo",
]


def _is_zero(x) -> bool:
    return not x


def rref(a, rhs=None):
    """Reduced row echelon form over an exact field.

    ``a`` is a list of rows of field elements (Fraction, GaussRat, ...).
    ``rhs`` is an optional list, one entry per row, of elements of any
    module over that field (they only need ``+``, ``-`` and scalar ``*``).
    Returns ``(rows, rhs, pivots)``; rows below ``len(pivots)`` are zero and
    their ``rhs`` entries are the consistency conditions.
    """
    m = [list(r) for r in a]
    b = None if rhs is None else list(rhs)
    nrows = len(m)
    ncols = len(m[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        piv = next((i for i in range(r, nrows) if not _is_zero(m[i][c])), None)
        if piv is None:
            continue
        if piv != r:
            m[r], m[piv] = m[piv], m[r]
            if b is not None:
                b[r], b[piv] = b[piv], b[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        if b is not None:
            b[r] = b[r] * inv
        for i in range(nrows):
            if i != r and not _is_zero(m[i][c]):
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
                if b is not None:
                    b[i] = b[i] - b[r] * f
        pivots.append(c)
        r += 1
    return m, b, pivots


def exact_nullspace(a, zero=Fraction(0), one=Fraction(1)) -> list[list]:
    """Basis of {x : a x = 0}, one vector per free column."""
    if not a:
        return []
    m, _, pivots = rref(a)
    ncols = len(a[0])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [zero] * ncols
        v[fc] = one
        for row, pc in enumerate(pivots):
            v[pc] = -m[row][fc]
        basis.append(v)
    return basis


@dataclass(frozen=True)
class NullspaceInfo:
    dim: int
    singular_values: tuple
    smallest_retained: float | None
    largest_discarded: float | None
    threshold: float

    @property
    def gap(self) -> float:
        if self.smallest_retained is None or self.largest_discarded is None:
            return float("inf")
        if self.largest_discarded == 0:
            return float("inf")
        return self.smallest_retained / self.largest_discarded


def svd_nullspace(a: np.ndarray, tau: float = 1e-10):
    """Orthonormal nullspace basis (rows) via SVD with threshold ``tau * sigma_max``."""
    a = np.asarray(a, dtype=complex)
    # gesvd resolves the small singular values more reliably than gesdd
    _, s, vh = scipy.linalg.svd(a, lapack_driver="gesvd")
    n = a.shape[1]
    smax = s[0] if len(s) else 0.0
    thr = tau * smax
    rank = int(np.sum(s > thr))
    full = np.concatenate([s, np.zeros(max(0, n - len(s)))])
    basis = vh[rank:].conj()
    info = NullspaceInfo(
        dim=n - rank,
        singular_values=tuple(float(x) for x in full),
        smallest_retained=float(full[rank - 1]) if rank > 0 else None,
        largest_discarded=float(full[rank]) if rank < n else None,
        threshold=float(thr),
    )
    return basis, info


@dataclass
class Solution:
    particular: dict
    basis: list
    inconsistent: bool = False
    info: NullspaceInfo | None = None


@dataclass
class LinearSystem:
    """Rows are affine forms ``{unknown: coeff, None: constant}`` that must vanish."""

    unknowns: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        known = set(self.unknowns)
        for row in self.rows:
            extra = {k for k in row if k is not None} - known
            if extra:
                raise ValueError(f"row references undeclared unknowns {sorted(map(str, extra))}")

    def matrix(self):
        idx = {u: i for i, u in enumerate(self.unknowns)}
        a = [[0] * len(self.unknowns) for _ in self.rows]
        b = [0] * len(self.rows)
        for r, row in enumerate(self.rows):
            for k, c in row.items():
                if k is None:
                    b[r] = c
                else:
                    a[r][idx[k]] = c
        return a, b

    def solve(self, backend: str = "exact", tau: float = 1e-10) -> Solution:
        a, b = self.matrix()
        n = len(self.unknowns)
        if backend == "f64":
            am = np.array(a, dtype=complex).reshape(len(self.rows), n)
            bm = -np.array(b, dtype=complex)
            basis, info = svd_nullspace(am, tau) if len(self.rows) else (np.eye(n, dtype=complex), None)
            if len(self.rows):
                x, *_ = np.linalg.lstsq(am, bm, rcond=None)
                resid = np.linalg.norm(am @ x - bm)
                bad = resid > 1e-9 * max(1.0, np.linalg.norm(bm))
            else:
                x, bad = np.zeros(n, dtype=complex), False
            return Solution(
                particular={} if bad else dict(zip(self.unknowns, x)),
                basis=[dict(zip(self.unknowns, v)) for v in basis],
                inconsistent=bool(bad),
                info=info,
            )
        a = [[Fraction(x) if isinstance(x, int) else x for x in row] for row in a]
        zero = Fraction(0)
        m, rhs, pivots = rref(a, [-x for x in b]) if self.rows else ([], [], [])
        for r in range(len(pivots), len(m)):
            if rhs[r]:
                return Solution(particular={}, basis=[], inconsistent=True)
        part = {u: zero for u in self.unknowns}
        for row, pc in enumerate(pivots):
            part[self.unknowns[pc]] = rhs[row]
        ns = exact_nullspace(a) if self.rows else [
            [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        return Solution(particular=part, basis=[dict(zip(self.unknowns, v)) for v in ns])
