"""Dense matrix core for small lower-triangular matrices over R or C.

Everything operates on plain numpy arrays (float64 or complex128); the
"field" of a matrix is carried by its dtype.  Matrices here are tiny
(n <= 10 in practice), so clarity wins over cleverness everywhere except
word evaluation, which lives in :mod:`trisemi.genset`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, InputError

REAL = "real"
COMPLEX = "complex"

# Consecutive diagonal moduli must differ by at least this ratio before we
# trust the triangular eigendecomposition (keeps S^-1 well conditioned).
MIN_MODULUS_RATIO = 1.05


def field_of(a: np.ndarray) -> str:
    return COMPLEX if np.iscomplexobj(a) else REAL


def dtype_for(field: str):
    if field == REAL:
        return np.float64
    if field == COMPLEX:
        return np.complex128
    raise InputError(f"unknown field {field!r}")


def as_matrix(entries, field: str | None = None) -> np.ndarray:
    """Coerce to a square 2-D array of the requested field."""
    a = np.asarray(entries)
    if field is None:
        field = field_of(a)
    a = a.astype(dtype_for(field))
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    return a


def identity(n: int, field: str = REAL) -> np.ndarray:
    return np.eye(n, dtype=dtype_for(field))


def is_lower_triangular(a: np.ndarray) -> bool:
    n = a.shape[0]
    if n == 1:
        return True
    iu = np.triu_indices(n, k=1)
    return bool(np.all(a[iu] == 0))


def is_diagonal(a: np.ndarray) -> bool:
    return bool(np.all(a[~np.eye(a.shape[0], dtype=bool)] == 0))


def _check_compatible(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if field_of(a) != field_of(b):
        raise InputError(f"field mismatch: {field_of(a)} vs {field_of(b)}")


def mat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_compatible(a, b)
    return a @ b


def mat_pow(a: np.ndarray, k: int) -> np.ndarray:
    """k-th power by repeated squaring; k = 0 gives the identity."""
    if k < 0:
        raise InputError("negative exponent")
    if a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    result = identity(a.shape[0], field_of(a))
    base = a
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def sup_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


@dataclass(frozen=True)
class EigenFactors:
    """Triangular eigendecomposition A = S diag(d) S^-1, S unit lower triangular."""

    S: np.ndarray
    d: np.ndarray

    @property
    def S_inv(self) -> np.ndarray:
        return _unit_lower_inverse(self.S)


def _unit_lower_inverse(s: np.ndarray) -> np.ndarray:
    """Invert a unit lower-triangular matrix by forward substitution."""
    n = s.shape[0]
    inv = identity(n, field_of(s))
    for j in range(n):
        for i in range(j + 1, n):
            inv[i, j] = -np.dot(s[i, j:i], inv[j:i, j])
    return inv


def modulus_separation(d: np.ndarray) -> float:
    """Smallest ratio between consecutive sorted diagonal moduli (inf for n=1)."""
    mods = np.sort(np.abs(np.asarray(d)))
    if mods.size < 2:
        return float("inf")
    if mods[0] == 0.0:
        return 0.0
    return float(np.min(mods[1:] / mods[:-1]))


def tri_eigendecompose(a: np.ndarray, min_ratio: float = MIN_MODULUS_RATIO) -> EigenFactors:
    """Eigenvectors of a lower-triangular matrix with separated diagonal moduli.

    Column l of S solves (A - d_l I) S[:, l] = 0 by forward substitution and
    is normalized so S has unit diagonal.  Raises IllConditionedError when two
    diagonal moduli are within the separation ratio, since the substitution
    then divides by a near-zero gap.
    """
    a = np.asarray(a)
    if not is_lower_triangular(a):
        raise InputError("matrix must be lower triangular")
    n = a.shape[0]
    d = np.diag(a).copy()
    if np.any(np.abs(d) == 0.0) or modulus_separation(d) < min_ratio:
        raise IllConditionedError(
            f"diagonal moduli separation below ratio {min_ratio}: {np.abs(d)}"
        )
    s = identity(n, field_of(a))
    for l in range(n):
        for i in range(l + 1, n):
            s[i, l] = np.dot(a[i, l:i], s[l:i, l]) / (d[l] - a[i, i])
    return EigenFactors(S=s, d=d)


def growth_bound(a: np.ndarray, min_ratio: float = MIN_MODULUS_RATIO) -> float:
    """Constant lam with |A^k|_{ij} <= lam * |a_i|^k for all i, j and k >= 1.

    Since (A^k)_{ij} = sum_l S_{il} d_l^k (S^-1)_{lj} and only l <= i
    contribute, |d_l| <= |a_i| gives lam = max_{ij} sum_l |S_{il}||S^-1_{lj}|.
    Requires the diagonal moduli to increase down the diagonal.
    """
    f = tri_eigendecompose(a, min_ratio=min_ratio)
    mods = np.abs(f.d)
    if np.any(np.diff(mods) <= 0):
        raise InputError("diagonal moduli must be strictly increasing")
    return float(np.max(np.abs(f.S) @ np.abs(f.S_inv)))


def power_entry(d0: np.ndarray, t: np.ndarray, r: int, s: int, k: int):
    """Entry (r, s) of (diag(d0) + T)^k in closed form (1-based indices).

    Valid when T vanishes at every position ordered before (r, s) (checked by
    the caller via :mod:`trisemi.ordering`); the value is
    ((a_r^k - a_s^k) / (a_r - a_s)) * T_rs.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if not r > s:
        raise InputError("requires r > s")
    d0 = np.asarray(d0)
    ar, as_ = d0[r - 1], d0[s - 1]
    if ar == as_:
        raise InputError("diagonal entries at r and s must differ")
    trs = np.asarray(t)[r - 1, s - 1]
    # Geometric form a_s^{k-1} * sum (a_r/a_s)^j is no better conditioned here;
    # moduli are separated, so the direct quotient is fine.
    return (ar**k - as_**k) / (ar - as_) * trs
