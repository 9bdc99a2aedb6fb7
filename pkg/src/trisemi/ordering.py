"""Total order on lower-triangular index positions and the tail classes.

Positions are 1-based pairs (r, s) with 1 <= s <= r <= n, ordered first by
diagonal offset r - s and then by row r.  A "tail class" anchored at (r, s)
is the set of lower-triangular matrices vanishing at every position strictly
before the anchor; these classes are nested and closed under multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .matcore import is_lower_triangular

# Entries at most this large count as structural zeros for class membership.
ZERO_TOL = 1e-14

LT, EQ, GT = -1, 0, 1


def check_position(p: tuple[int, int], n: int) -> None:
    r, s = p
    if not (1 <= s <= r <= n):
        raise InputError(f"position {p} outside the triangular index set for n={n}")


def position_key(p: tuple[int, int]) -> tuple[int, int]:
    """Sort key realizing the order: offset first, then row."""
    r, s = p
    return (r - s, r)


def compare(p: tuple[int, int], q: tuple[int, int], n: int | None = None) -> int:
    if n is not None:
        check_position(p, n)
        check_position(q, n)
    kp, kq = position_key(p), position_key(q)
    return LT if kp < kq else (GT if kp > kq else EQ)


def successor(p: tuple[int, int], n: int) -> tuple[int, int] | None:
    """Least position after p, or None at the maximum (n, 1)."""
    check_position(p, n)
    r, s = p
    if r < n:
        return (r + 1, s + 1)
    offset = r - s
    if offset == n - 1:
        return None
    return (offset + 2, 1)


def walk(n: int, start: tuple[int, int] = (1, 1)) -> list[tuple[int, int]]:
    """The successor chain from start through the maximum, inclusive."""
    check_position(start, n)
    chain = [start]
    while (nxt := successor(chain[-1], n)) is not None:
        chain.append(nxt)
    return chain


@dataclass(frozen=True)
class TailClass:
    """Matrices vanishing strictly before the anchor position."""

    anchor: tuple[int, int]
    n: int

    def __post_init__(self):
        check_position(self.anchor, self.n)

    def earlier_positions(self) -> list[tuple[int, int]]:
        key = position_key(self.anchor)
        return [
            (r, s)
            for r in range(1, self.n + 1)
            for s in range(1, r + 1)
            if position_key((r, s)) < key
        ]

    def contains(self, t: np.ndarray, tol: float = ZERO_TOL) -> bool:
        t = np.asarray(t)
        if t.shape != (self.n, self.n):
            raise InputError(f"expected a {self.n}x{self.n} matrix, got {t.shape}")
        if not is_lower_triangular(t):
            raise InputError("matrix must be lower triangular")
        return all(abs(t[r - 1, s - 1]) <= tol for r, s in self.earlier_positions())
