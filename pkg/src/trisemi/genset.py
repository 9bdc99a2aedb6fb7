"""Generator sets for dense subsemigroups of lower-triangular matrices.

A generator set holds n + 1 generators of n x n lower-triangular matrices:
generator 0 is D0 + T (diagonal D0 with strictly increasing moduli plus a
strictly-lower perturbation T with all entries nonzero), and generators
1..n are diagonal matrices D_1..D_n.  Words over the generators evaluate to
ordered products of generator powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, WordOverflowError
from .matcore import (
    COMPLEX,
    REAL,
    dtype_for,
    field_of,
    identity,
    mat_pow,
    sup_norm,
)

# Evaluation guard: any accumulator entry beyond this raises WordOverflowError.
ENTRY_CAP = 1e300

# Exponent chunks are sized so a single chunk power stays comfortably inside
# the double range even after growth-constant slack.
_CHUNK_LOG_BUDGET = 500.0

# Minimum ratio between consecutive |a_i| accepted by validation.
MODULUS_RATIO_FLOOR = 1.05

_STRUCT_ZERO = 1e-14


@dataclass(frozen=True)
class Word:
    """Finite product of generator powers: ordered (gen_id, exponent) factors."""

    factors: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for g, e in self.factors:
            if e <= 0:
                raise InputError(f"exponent must be positive, got {(g, e)}")
            if g < 0:
                raise InputError(f"generator id must be >= 0, got {(g, e)}")

    @staticmethod
    def of(*factors: tuple[int, int]) -> "Word":
        return Word(tuple((int(g), int(e)) for g, e in factors))

    @staticmethod
    def merged(factors) -> "Word":
        """Build a word merging adjacent factors with equal generator id."""
        out: list[tuple[int, int]] = []
        for g, e in factors:
            g, e = int(g), int(e)
            if e == 0:
                continue
            if out and out[-1][0] == g:
                out[-1] = (g, out[-1][1] + e)
            else:
                out.append((g, e))
        return Word(tuple(out))

    def __len__(self) -> int:
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __add__(self, other: "Word") -> "Word":
        return Word.merged(list(self.factors) + list(other.factors))

    def repeat(self, k: int) -> "Word":
        if k <= 0:
            raise InputError("repetition count must be positive")
        return Word.merged(list(self.factors) * k)

    def total_exponents(self, n_generators: int) -> np.ndarray:
        tot = np.zeros(n_generators, dtype=np.int64)
        for g, e in self.factors:
            tot[g] += e
        return tot


@dataclass
class GeneratorSet:
    """Generator 0 is D0 + T; generators 1..len(D) are the diagonals D_j.

    A freshly built set has len(D) == n; truncating to a smaller dimension
    keeps every generator id meaningful (diagonals acting past the retained
    block truncate to the identity), so len(D) can exceed n.
    """

    n: int
    field: str
    a: np.ndarray  # diagonal of D0, shape (n,)
    T: np.ndarray  # strictly lower perturbation, shape (n, n)
    D: list[np.ndarray]  # diagonals of D_1, D_2, ..., each shape (n,)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        dt = dtype_for(self.field)
        self.a = np.asarray(self.a, dtype=dt).reshape(self.n)
        self.T = np.asarray(self.T, dtype=dt).reshape(self.n, self.n)
        self.D = [np.asarray(d, dtype=dt).reshape(self.n) for d in self.D]
        if len(self.D) < self.n:
            raise InputError(f"expected >= {self.n} diagonal generators, got {len(self.D)}")

    @property
    def n_generators(self) -> int:
        return 1 + len(self.D)

    # -- generator matrices -------------------------------------------------

    def gen0(self, m: int | None = None) -> np.ndarray:
        m = self.n if m is None else m
        return np.diag(self.a[:m]) + self.T[:m, :m]

    def generator(self, gid: int, m: int | None = None) -> np.ndarray:
        m = self.n if m is None else m
        if gid == 0:
            return self.gen0(m)
        if 1 <= gid <= len(self.D):
            return np.diag(self.D[gid - 1][:m])
        raise InputError(f"generator id {gid} out of range 0..{len(self.D)}")

    def diag_columns(self, m: int | None = None) -> np.ndarray:
        """Column alpha = diagonal of generator alpha, shape (m, n_generators)."""
        m = self.n if m is None else m
        cols = [self.a[:m]] + [d[:m] for d in self.D]
        return np.column_stack(cols)

    def truncated(self, m: int) -> "GeneratorSet":
        """Top-left m x m blocks of every generator (generator count unchanged)."""
        if not 1 <= m <= self.n:
            raise InputError(f"truncation dimension {m} out of range 1..{self.n}")
        if m == self.n:
            return self
        key = ("truncated", m)
        if key not in self._cache:
            self._cache[key] = GeneratorSet(
                n=m,
                field=self.field,
                a=self.a[:m].copy(),
                T=self.T[:m, :m].copy(),
                D=[d[:m].copy() for d in self.D],
            )
        return self._cache[key]


def _first_primes(count: int, floor: int = 2, exclude: set[int] | None = None) -> list[int]:
    exclude = exclude or set()
    primes: list[int] = []
    candidate = max(2, floor)
    while len(primes) < count:
        if all(candidate % p for p in range(2, int(math.isqrt(candidate)) + 1)):
            if candidate not in exclude:
                primes.append(candidate)
        candidate += 1
    return primes


def default_generators(n: int, field: str = REAL, seed: int = 0) -> GeneratorSet:
    """Deterministic default family (seed reserved for future randomization).

    Real case: a_i = exp(-sqrt(p_{n+1-i})) over the first n primes (so moduli
    increase down the diagonal), D_j = identity except entry j = -exp(sqrt(q_j))
    with the q_j drawn from primes >= 5 disjoint from the p's, and T = 1 at
    every strictly-lower position.  The log-moduli are square roots of
    distinct primes, rationally independent, and their positive cone spans
    the whole space.  Complex case: same moduli, with each sign flip replaced
    by the unit factor exp(2*pi*i*phi_j), phi_j = frac(j*(sqrt(5)-1)/2).
    """
    del seed  # deterministic construction
    if n < 1:
        raise InputError("n must be >= 1")
    if field not in (REAL, COMPLEX):
        raise InputError(f"unknown field {field!r}")
    p = _first_primes(n)
    q = _first_primes(n, floor=5, exclude=set(p))
    dt = dtype_for(field)
    a = np.array([math.exp(-math.sqrt(p[n - i])) for i in range(1, n + 1)], dtype=dt)
    t = np.zeros((n, n), dtype=dt)
    for i in range(1, n):
        t[i, :i] = 1.0
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    diags = []
    for j in range(1, n + 1):
        d = np.ones(n, dtype=dt)
        mag = math.exp(math.sqrt(q[j - 1]))
        if field == REAL:
            d[j - 1] = -mag
        else:
            phi = math.fmod(j * golden, 1.0)
            d[j - 1] = mag * complex(math.cos(2 * math.pi * phi), math.sin(2 * math.pi * phi))
        diags.append(d)
    return GeneratorSet(n=n, field=field, a=a, T=t, D=diags)


def synthetic_generators(base_diag, scale: float = 0.001) -> GeneratorSet:
    """Small test family around an explicit D0 (real field).

    The diagonal generators are near-identity (log-moduli of size ~scale),
    which makes the diagonal semigroup fine-grained: useful for exercising
    the elimination cascade at tight tolerances with bounded exponents.
    Generator j flips the sign of coordinate j, and the log-moduli cone of
    the family spans the plane/space positively.
    """
    a = np.asarray(base_diag, dtype=np.float64)
    n = a.size
    if np.any(a <= 0) or np.any(np.diff(np.abs(a)) <= 0):
        raise InputError("base diagonal must be positive with increasing moduli")
    t = np.zeros((n, n))
    for i in range(1, n):
        t[i, :i] = 1.0
    irr = [math.sqrt(v) for v in _first_primes(2 * n)]
    diags = []
    for j in range(1, n + 1):
        d = np.ones(n)
        for i in range(1, n + 1):
            mag = scale * irr[(i + j * n) % len(irr)]
            # coordinate j is the sign carrier and shrinks; a staggered sign
            # pattern on the other coordinates keeps the cone full
            if i == j:
                d[i - 1] = -math.exp(-mag)
            else:
                d[i - 1] = math.exp(mag if (i + j) % 2 else -mag)
        diags.append(d)
    return GeneratorSet(n=n, field=REAL, a=a, T=t, D=diags)


def validate_generators(g: GeneratorSet) -> list[str]:
    """Empty list iff the set satisfies every structural requirement."""
    violations: list[str] = []
    mods = np.abs(g.a)
    if g.n >= 1 and mods[0] <= 0:
        violations.append("ineqdiag at i=1: |a_1| must be positive")
    for i in range(1, g.n):
        if mods[i] < MODULUS_RATIO_FLOOR * mods[i - 1]:
            violations.append(f"ineqdiag at i={i + 1}")
    for i in range(g.n):
        for j in range(g.n):
            if j < i and abs(g.T[i, j]) <= _STRUCT_ZERO:
                violations.append(f"condtr at ({i + 1},{j + 1})")
            if j >= i and abs(g.T[i, j]) > _STRUCT_ZERO:
                violations.append(f"condtr at ({i + 1},{j + 1}): expected structural zero")
    for jd, d in enumerate(g.D, start=1):
        for i in range(g.n):
            if abs(d[i]) == 0.0:
                violations.append(f"zero diagonal in D_{jd} at position {i + 1}")
    return violations


def require_valid(g: GeneratorSet) -> None:
    violations = validate_generators(g)
    if violations:
        raise InputError("invalid generator set: " + "; ".join(violations))


def _chunk_limit(gen: np.ndarray) -> int:
    """Largest exponent chunk whose power stays well inside double range."""
    diag = np.abs(np.diag(gen))
    worst = float(np.max(np.abs(np.log(diag)))) if np.all(diag > 0) else 0.0
    if worst < 1e-9:
        return 1 << 30
    return max(1, int(_CHUNK_LOG_BUDGET / worst))


def eval_word(g: GeneratorSet, w: Word, m: int | None = None) -> np.ndarray:
    """Ordered product of (truncated) generator powers.

    Large exponents are applied in chunks so intermediate powers stay
    representable; any accumulator entry rising past ENTRY_CAP (or going
    non-finite) raises WordOverflowError, which signals an unbalanced word.
    """
    if len(w) == 0:
        raise InputError("empty word")
    m = g.n if m is None else m
    if not 1 <= m <= g.n:
        raise InputError(f"evaluation dimension {m} out of range 1..{g.n}")
    gens: dict[int, np.ndarray] = {}
    chunks: dict[int, int] = {}
    powers: dict[tuple[int, int], np.ndarray] = {}
    acc = identity(m, g.field)
    for gid, exp in w:
        if gid > len(g.D):
            raise InputError(f"generator id {gid} out of range 0..{len(g.D)}")
        if gid not in gens:
            gens[gid] = g.generator(gid, m)
            chunks[gid] = _chunk_limit(gens[gid])
        limit = chunks[gid]
        remaining = exp
        while remaining > 0:
            step = min(remaining, limit)
            key = (gid, step)
            if key not in powers:
                powers[key] = mat_pow(gens[gid], step)
            acc = acc @ powers[key]
            remaining -= step
            peak = np.max(np.abs(acc))
            if not np.isfinite(peak) or peak > ENTRY_CAP:
                raise WordOverflowError(
                    f"entry magnitude {peak!r} beyond {ENTRY_CAP} while evaluating word"
                )
    return acc


def word_error(g: GeneratorSet, w: Word, target: np.ndarray, m: int | None = None) -> float:
    return sup_norm(eval_word(g, w, m) - np.asarray(target))
