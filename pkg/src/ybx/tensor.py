"""Dense matrix helpers: Kronecker products, site embeddings, norms.

Matrices are plain numpy arrays.  Float work uses ``complex`` dtype; the
exact and formal backends use ``object`` arrays whose entries all share one
scalar type.
"""
from __future__ import annotations

import numpy as np

from .scalars import GaussRat

__all__ = [
    "BackendMismatch",
    "backend_kind",
    "kron",
    "embed",
    "perm",
    "identity",
    "pauli",
    "frob",
    "rel_residual",
    "commutator_norm",
    "as_complex",
    "is_zero_matrix",
    "fit_scalar",
    "inverse",
]


class BackendMismatch(TypeError):
    pass


def backend_kind(a: np.ndarray) -> str:
    if a.dtype != object:
        return "f64"
    kinds = {type(x).__name__ for x in a.flat if not isinstance(x, int)}
    if not kinds:
        return "int"
    if len(kinds) > 1:
        return "mixed"
    (name,) = kinds
    return {"GaussRat": "exact", "FracElement": "formal", "TruncatedSeries": "series"}.get(name, name)


def _check_same(a, b):
    ka, kb = backend_kind(a), backend_kind(b)
    if "mixed" in (ka, kb) or (ka != kb and "int" not in (ka, kb)):
        raise BackendMismatch(f"backend mismatch: {ka} vs {kb}")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; entry (i*db+k, j*db+l) = a[i,j]*b[k,l]."""
    _check_same(a, b)
    return np.kron(a, b)


def identity(n: int, like: np.ndarray | None = None) -> np.ndarray:
    if like is None or like.dtype != object:
        return np.eye(n, dtype=complex)
    one = next(iter(like.flat)) ** 0
    zero = one - one
    out = np.empty((n, n), dtype=object)
    out[...] = zero
    for i in range(n):
        out[i, i] = one
    return out


def perm(like: np.ndarray | None = None) -> np.ndarray:
    """The 4x4 swap operator P on C^2 (x) C^2."""
    out = identity(4, like)
    out[[1, 2]] = out[[2, 1]]
    return out


def pauli(name: str, backend=None) -> np.ndarray:
    """Pauli matrices x, y, z and the ladder operators + and -."""
    tables = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
        "+": [[0, 1], [0, 0]],
        "-": [[0, 0], [1, 0]],
        "i": [[1, 0], [0, 1]],
    }
    rows = tables[name]
    if backend is None or backend.name == "f64":
        return np.array(rows, dtype=complex)
    if backend.name == "exact":
        return np.array([[GaussRat(int(x.real), int(x.imag)) if isinstance(x, complex) else GaussRat(x)
                          for x in row] for row in rows], dtype=object)
    if name == "y":
        raise ValueError("sigma^y is not real-rational")
    return backend.matrix(rows)


def _site_permutation(nsites: int, i: int, j: int) -> np.ndarray:
    # index q[new] = old, where "old" places the two acted-on factors first
    others = [s for s in range(nsites) if s not in (i, j)]
    order = [i, j] + others
    dim = 2 ** nsites
    q = np.empty(dim, dtype=int)
    for new in range(dim):
        bits = [(new >> (nsites - 1 - s)) & 1 for s in range(nsites)]
        old = 0
        for s in order:
            old = (old << 1) | bits[s]
        q[new] = old
    return q


def embed(x: np.ndarray, slot, nsites: int = 3) -> np.ndarray:
    """Act with the 4x4 ``x`` on tensor factors ``slot`` (1-based), identity elsewhere.

    ``slot=(2, 1)`` means the first factor of ``x`` acts on site 2, which
    is how operators such as R_21 are formed.
    """
    if x.shape != (4, 4):
        raise ValueError("embed expects a 4x4 operator")
    i, j = slot
    if not (1 <= i <= nsites and 1 <= j <= nsites) or i == j:
        raise ValueError(f"unsupported slot {slot!r} for {nsites} sites")
    rest = 2 ** (nsites - 2)
    eye = np.eye(rest, dtype=complex) if x.dtype != object else np.eye(rest, dtype=int).astype(object)
    full = np.kron(x, eye)
    if (i, j) == (1, 2):
        return full
    q = _site_permutation(nsites, i - 1, j - 1)
    return full[np.ix_(q, q)]


def as_complex(a) -> np.ndarray:
    if isinstance(a, np.ndarray) and a.dtype != object:
        return a.astype(complex)
    return np.vectorize(complex, otypes=[complex])(np.asarray(a, dtype=object))


def frob(a) -> float:
    return float(np.linalg.norm(as_complex(a)))


def is_zero_matrix(a) -> bool:
    if a.dtype != object:
        return not np.any(a)
    return all(not x for x in a.flat)


def rel_residual(lhs, rhs) -> float:
    """||lhs - rhs||_F / max(1, ||lhs||_F, ||rhs||_F); exactly 0.0 for exact equality.

    Formal entries that cannot be converted to numbers give ``inf`` when the
    difference is not identically zero.
    """
    if lhs.dtype == object or rhs.dtype == object:
        if is_zero_matrix(lhs - rhs):
            return 0.0
        try:
            lc, rc = as_complex(lhs), as_complex(rhs)
        except (TypeError, ValueError):
            return float("inf")
    else:
        lc, rc = lhs, rhs
    return float(np.linalg.norm(lc - rc) / max(1.0, np.linalg.norm(lc), np.linalg.norm(rc)))


def commutator_norm(a, b, eps: float = 1e-300) -> float:
    a, b = as_complex(a), as_complex(b)
    c = a @ b - b @ a
    return float(np.linalg.norm(c) / (np.linalg.norm(a) * np.linalg.norm(b) + eps))


def fit_scalar(a, b) -> tuple[complex, float]:
    """Fit ``a ~ c*b`` using the largest entry of ``a`` on the support of ``b`` as pivot.

    Returns ``(c, deviation)`` with deviation ``||a - c b||_F / ||a||_F``
    (the absolute norm when ``a`` vanishes).
    """
    a, b = as_complex(a), as_complex(b)
    weight = np.abs(a) * (b != 0)
    idx = np.unravel_index(np.argmax(weight), b.shape)
    c = a[idx] / b[idx] if weight[idx] > 0 else 0j
    na = np.linalg.norm(a)
    dev = np.linalg.norm(a - c * b)
    return complex(c), float(dev / na if na > 0 else dev)


def inverse(a: np.ndarray) -> np.ndarray:
    """Matrix inverse; exact Gauss-Jordan for object arrays."""
    if a.dtype != object:
        return np.linalg.inv(a)
    n = a.shape[0]
    m = np.concatenate([a.copy(), identity(n, a)], axis=1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r, col]), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
        m[col] = m[col] * (1 / m[col, col])
        for r in range(n):
            if r != col and m[r, col]:
                m[r] = m[r] - m[r, col] * m[col]
    return m[:, n:]
