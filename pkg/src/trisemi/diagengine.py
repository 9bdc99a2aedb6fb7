"""Nonnegative-integer exponent solver for diagonal targets.

Given the diagonal semigroup spanned by generator diagonals d_0..d_k (as
columns), approximate a target diagonal by choosing exponents m >= 0 so the
evaluated product prod_alpha d_alpha^{m_alpha} minimizes the sup-norm
distance to the target, subject to exact sign match in the real case.

Magnitudes live in log space: the problem is simultaneous approximation of
the target log-moduli by nonnegative integer combinations of the generator
log-moduli, with sign (parity) or argument constraints layered on top.  Two
solvers are provided: a brute-force box enumeration (the oracle) and a
scalable sweep along the generator-0 exponent with parity-aware rounding of
the remaining exponents.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

from .errors import InfeasibleError, InputError, SpanningError
from .genset import GeneratorSet
from .matcore import COMPLEX, REAL, field_of, is_diagonal

DRIFT_TOL = 0.1
DRIFT_MAX_COEFF = 2000
_CHUNK = 1 << 13
_PARITY_FREE = -1


@dataclass(frozen=True)
class DiagTarget:
    """Log-moduli plus phase data of a nonsingular diagonal target."""

    logmag: np.ndarray  # (n,)
    phase: np.ndarray  # real: signs (+-1); complex: arguments in [0, 2pi)
    values: np.ndarray  # the target diagonal entries themselves
    field: str


def diag_log_target(b: np.ndarray) -> DiagTarget:
    b = np.asarray(b)
    if b.ndim == 2:
        if not is_diagonal(b):
            raise InputError("target must be diagonal")
        b = np.diag(b)
    if np.any(b == 0):
        raise InputError("target has a zero diagonal entry")
    f = field_of(b)
    logmag = np.log(np.abs(b))
    if f == REAL:
        phase = np.sign(np.real(b)).astype(np.float64)
    else:
        phase = np.mod(np.angle(b), 2 * np.pi)
    return DiagTarget(logmag=logmag, phase=phase, values=b.copy(), field=f)


@dataclass(frozen=True)
class SolveConfig:
    """Search limits: sup-norm goal, candidate budget, exponent box, floor on m_0.

    The budget counts candidate exponent vectors examined; box caps every
    exponent (scalar, or one cap per generator).
    """

    tol: float
    budget: int = 10**6
    box: int | tuple = 10**6
    min_m0: int = 0
    mode: str = "heuristic"

    def __post_init__(self):
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if self.budget < 1 or np.any(np.asarray(self.box) < 1):
            raise InputError("budget and box must be >= 1")

    def box_array(self, k: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.box, dtype=np.int64), (k,)).copy()


@dataclass(frozen=True)
class DiagSolveResult:
    m: np.ndarray  # exponents, one per generator (gen 0 first)
    error: float
    converged: bool
    nodes: int


@dataclass(frozen=True)
class DiagFamily:
    """Column alpha = diagonal of generator alpha (generator 0 first)."""

    cols: np.ndarray  # (n, k)
    field: str

    @property
    def n(self) -> int:
        return self.cols.shape[0]

    @property
    def k(self) -> int:
        return self.cols.shape[1]

    @property
    def logmag(self) -> np.ndarray:
        return np.log(np.abs(self.cols))

    @property
    def negbits(self) -> np.ndarray:
        return (np.real(self.cols) < 0).astype(np.int8)

    @property
    def args(self) -> np.ndarray:
        return np.mod(np.angle(self.cols), 2 * np.pi)


def family_from(g: GeneratorSet, m: int | None = None, gen0_diag=None) -> DiagFamily:
    cols = g.diag_columns(m)
    if gen0_diag is not None:
        cols = cols.copy()
        cols[:, 0] = np.asarray(gen0_diag, dtype=cols.dtype)
    if np.any(cols == 0):
        raise InputError("diagonal family contains a zero entry")
    return DiagFamily(cols=cols, field=g.field)


def worker_count() -> int:
    """Thread cap from TRISEMI_THREADS (0 selects a small auto value)."""
    raw = os.environ.get("TRISEMI_THREADS", "")
    try:
        v = int(raw) if raw else 1
    except ValueError:
        v = 1
    if v == 0:
        v = min(os.cpu_count() or 1, 8)
    return max(1, v)


# -- evaluation ---------------------------------------------------------------


def eval_exponents(fam: DiagFamily, m: np.ndarray) -> np.ndarray:
    """Diagonal values of the word with exponent rows m, shape (batch, n)."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    logs = m @ fam.logmag.T
    with np.errstate(over="ignore", under="ignore"):
        mags = np.exp(logs)
    if fam.field == REAL:
        flips = (m.astype(np.int64) @ fam.negbits.T.astype(np.int64)) & 1
        return np.where(flips == 1, -mags, mags)
    phases = np.mod(m @ fam.args.T, 2 * np.pi)
    return mags * np.exp(1j * phases)


def exact_error(fam: DiagFamily, m: np.ndarray, target: DiagTarget) -> float:
    """Independent re-evaluation of one exponent vector (compensated sums)."""
    m = np.asarray(m, dtype=np.int64)
    worst = 0.0
    for i in range(fam.n):
        log_terms = [float(m[a]) * float(np.log(abs(fam.cols[i, a]))) for a in range(fam.k)]
        mag = math.exp(min(math.fsum(log_terms), 709.0))
        if fam.field == REAL:
            flips = sum(int(m[a]) for a in range(fam.k) if np.real(fam.cols[i, a]) < 0)
            val = -mag if flips & 1 else mag
        else:
            arg_terms = [float(m[a]) * float(np.angle(fam.cols[i, a])) for a in range(fam.k)]
            arg = math.fsum(arg_terms)
            val = mag * complex(math.cos(arg), math.sin(arg))
        worst = max(worst, abs(val - complex(target.values[i])))
    return worst


def _candidate_errors(
    fam: DiagFamily, m_rows: np.ndarray, target: DiagTarget, require_signs: bool
) -> np.ndarray:
    vals = eval_exponents(fam, m_rows)
    errs = np.max(np.abs(vals - target.values[None, :]), axis=1)
    if require_signs and fam.field == REAL:
        good = np.all(np.sign(np.real(vals)) == target.phase[None, :], axis=1)
        errs = np.where(good, errs, np.inf)
    return errs


def _lex_best(m_rows: np.ndarray, errs: np.ndarray) -> tuple[np.ndarray, float]:
    best = np.min(errs)
    idx = np.nonzero(errs == best)[0]
    if idx.size > 1:
        order = np.lexsort(m_rows[idx].T[::-1])
        pick = idx[order[0]]
    else:
        pick = idx[0]
    return m_rows[pick].copy(), float(best)


class _Best:
    """Deterministic reduction by (error, lexicographic exponents)."""

    def __init__(self):
        self.m: np.ndarray | None = None
        self.err = np.inf

    def offer(self, m: np.ndarray, err: float) -> None:
        if self.m is None or err < self.err or (err == self.err and tuple(m) < tuple(self.m)):
            self.m, self.err = np.asarray(m, dtype=np.int64).copy(), float(err)

    def offer_rows(self, m_rows: np.ndarray, errs: np.ndarray) -> None:
        if m_rows.shape[0]:
            m, e = _lex_best(m_rows, errs)
            self.offer(m, e)


# -- sign feasibility (real case) ----------------------------------------------


def _solve_gf2(a: np.ndarray, b: np.ndarray):
    """Particular solution and kernel basis of A x = b over GF(2), or None."""
    a = a.copy() % 2
    b = b.copy() % 2
    rows, cols = a.shape
    aug = np.hstack([a, b.reshape(-1, 1)]).astype(np.int8)
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        pr = next((i for i in range(r, rows) if aug[i, c]), None)
        if pr is None:
            continue
        aug[[r, pr]] = aug[[pr, r]]
        for i in range(rows):
            if i != r and aug[i, c]:
                aug[i] ^= aug[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    for i in range(r, rows):
        if aug[i, -1]:
            return None
    x = np.zeros(cols, dtype=np.int8)
    for i, c in enumerate(pivots):
        x[c] = aug[i, -1]
    free = [c for c in range(cols) if c not in pivots]
    kernel = []
    for fc in free:
        v = np.zeros(cols, dtype=np.int8)
        v[fc] = 1
        for i, c in enumerate(pivots):
            v[c] = aug[i, fc]
        kernel.append(v)
    return x, kernel


def _parity_classes(fam: DiagFamily, target: DiagTarget, cap: int = 64) -> list[np.ndarray]:
    """Exponent parity assignments compatible with the target sign pattern.

    Only generators that carry a sign anywhere are constrained; the rest stay
    free (_PARITY_FREE).  Classes are enumerated over the GF(2) kernel by Gray
    code, size-capped.
    """
    want = (np.real(target.values) < 0).astype(np.int8)
    carriers = [a for a in range(fam.k) if fam.negbits[:, a].any()]
    if not carriers:
        if want.any():
            raise InfeasibleError("target needs sign flips but no generator carries one")
        return [np.full(fam.k, _PARITY_FREE, dtype=np.int8)]
    sol = _solve_gf2(fam.negbits[:, carriers].astype(np.int8), want)
    if sol is None:
        raise InfeasibleError("no exponent parity matches the target sign pattern")
    x, kernel = sol

    def expand(xc: np.ndarray) -> np.ndarray:
        full = np.full(fam.k, _PARITY_FREE, dtype=np.int8)
        for pos, a in enumerate(carriers):
            full[a] = xc[pos]
        return full

    classes = [expand(x)]
    state = x.copy()
    gray = 0
    for idx in range(1, 1 << min(len(kernel), 16)):
        if len(classes) >= cap:
            break
        new_gray = idx ^ (idx >> 1)
        bit = (gray ^ new_gray).bit_length() - 1
        gray = new_gray
        state = (state + kernel[bit]) % 2
        classes.append(expand(state))
    return classes


# -- structure detection ---------------------------------------------------------


@dataclass(frozen=True)
class _Structure:
    axis_of: list[int | None]  # per coordinate: id of the generator acting on it
    dense: bool  # True when some generator moves several coordinates


def _detect_structure(fam: DiagFamily) -> _Structure:
    lm = fam.logmag
    tol = 1e-15
    axis_of: list[int | None] = [None] * fam.n
    dense = False
    for j in range(1, fam.k):
        nz = np.nonzero(np.abs(lm[:, j]) > tol)[0]
        if nz.size == 1:
            i = int(nz[0])
            prev = axis_of[i]
            if prev is None or abs(lm[i, j]) < abs(lm[i, prev]):
                axis_of[i] = j
        elif nz.size > 1:
            dense = True
    return _Structure(axis_of=axis_of, dense=dense)


# -- exhaustive oracle ----------------------------------------------------------


def diag_solve_exhaustive(g_or_fam, target: DiagTarget, cfg: SolveConfig) -> DiagSolveResult:
    """Minimize over the full exponent box; the reference oracle.

    Real case requires an exact sign match; candidates with any mismatched
    sign are infeasible.  Ties break toward the lexicographically smallest
    exponent vector.
    """
    fam = g_or_fam if isinstance(g_or_fam, DiagFamily) else family_from(g_or_fam)
    box = int(np.max(cfg.box_array(fam.k)))
    total = (box + 1) ** fam.k
    if total > cfg.budget:
        raise InputError(
            f"exhaustive box {box} needs {total} evaluations over budget {cfg.budget}"
        )
    if cfg.min_m0 > box:
        raise InfeasibleError("min_m0 exceeds the exponent box")
    shape = (box + 1,) * fam.k
    best = _Best()
    nodes = 0
    for start in range(0, total, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, total))
        m_rows = np.stack(np.unravel_index(ids, shape), axis=1).astype(np.int64)
        keep = (m_rows[:, 0] >= cfg.min_m0) & (m_rows.sum(axis=1) > 0)
        m_rows = m_rows[keep]
        if m_rows.size == 0:
            continue
        errs = _candidate_errors(fam, m_rows, target, require_signs=True)
        nodes += m_rows.shape[0]
        best.offer_rows(m_rows, errs)
    if best.m is None or not np.isfinite(best.err):
        raise InfeasibleError("no feasible exponent vector inside the box")
    err = exact_error(fam, best.m, target)
    return DiagSolveResult(m=best.m, error=err, converged=err <= cfg.tol, nodes=nodes)


# -- sweep heuristic -------------------------------------------------------------


def _round_to_parity(x: np.ndarray, parity) -> np.ndarray:
    if parity is None or np.ndim(x) == 0:
        return np.round(x)
    out = np.round(x)
    if np.isscalar(parity):
        if parity != _PARITY_FREE:
            out = 2.0 * np.round((x - parity) / 2.0) + parity
        return out
    constrained = parity != _PARITY_FREE
    par = np.where(constrained, parity, 0).astype(np.float64)
    snapped = 2.0 * np.round((x - par) / 2.0) + par
    return np.where(constrained, snapped, out)


def _sweep_class(
    fam: DiagFamily,
    target: DiagTarget,
    cfg: SolveConfig,
    struct: _Structure,
    parity: np.ndarray | None,
    m0_values: np.ndarray,
    best: _Best,
    window: int = 4,
) -> int:
    """Evaluate the best candidate at every generator-0 exponent in m0_values.

    Axis coordinates are optimized independently over a parity-respecting
    window around the log-space rounding (the per-m0 optimum); any dense
    remainder is rounded from the least-squares solution with axis dithers.
    """
    n, k = fam.n, fam.k
    lm = fam.logmag
    box = cfg.box_array(k)
    axis_gens = sorted({j for j in struct.axis_of if j is not None})
    dense_gens = [
        j
        for j in range(1, k)
        if j not in axis_gens and np.any(np.abs(lm[:, j]) > 1e-15)
    ]
    base_log = np.outer(m0_values, lm[:, 0])

    if not dense_gens:
        return _sweep_axis_only(
            fam, target, cfg, struct, parity, m0_values, best, window, base_log
        )

    # dense path: solve for all moving generators at once, then round + dither
    moving = axis_gens + dense_gens
    vmat = lm[:, moving]  # (n, len(moving))
    pinv = np.linalg.pinv(vmat)
    theta = target.logmag[None, :] - base_log  # (batch, n)
    y = theta @ pinv.T  # (batch, len(moving))
    par_vec = None
    if parity is not None:
        par_vec = np.array([parity[j] for j in moving], dtype=np.int8)
    rounded = _round_to_parity(y, par_vec)
    rounded = np.clip(rounded, 0.0, box[moving][None, :].astype(np.float64))
    menu: list[np.ndarray]
    if len(moving) <= 4:
        steps = [(-2.0, 0.0, 2.0) if parity is not None else (-1.0, 0.0, 1.0)] * len(moving)
        menu = [np.array(c) for c in iter_product(*steps)]
    else:
        menu = [np.zeros(len(moving))]
        for idx in range(len(moving)):
            for d in (-2.0, 2.0) if parity is not None else (-1.0, 1.0):
                v = np.zeros(len(moving))
                v[idx] = d
                menu.append(v)
    nodes = 0
    for offset in menu:
        cand = rounded + offset[None, :]
        bad = (cand < 0) | (cand > box[moving][None, :])
        if par_vec is not None:
            floor = np.where(par_vec == 1, 1.0, 0.0)
            cand = np.maximum(cand, floor[None, :])
        cand = np.clip(cand, 0, box[moving][None, :])
        rows = np.zeros((m0_values.size, k), dtype=np.int64)
        rows[:, 0] = m0_values
        if parity is not None:
            for j in range(1, k):
                if j not in moving and parity[j] == 1:
                    rows[:, j] = 1
        rows[:, moving] = cand.astype(np.int64)
        rows = rows[~np.any(bad, axis=1)]
        if rows.shape[0] == 0:
            continue
        errs = _candidate_errors(fam, rows, target, require_signs=True)
        nodes += rows.shape[0]
        best.offer_rows(rows, errs)
    return nodes


def _sweep_axis_only(
    fam, target, cfg, struct, parity, m0_values, best, window, base_log
) -> int:
    """Fully decoupled sweep: per-coordinate window minimization."""
    n, k = fam.n, fam.k
    lm = fam.logmag
    box = cfg.box_array(k)
    nb = fam.negbits
    count = m0_values.size
    fixed = np.zeros(k, dtype=np.int64)
    if parity is not None:
        for j in range(1, k):
            if j not in struct.axis_of and parity[j] == 1:
                fixed[j] = 1
                base_log = base_log + lm[:, j][None, :]
    if fam.field == COMPLEX:
        base_arg = np.outer(m0_values, fam.args[:, 0])
        for j in range(1, k):
            if fixed[j]:
                base_arg = base_arg + fam.args[:, j][None, :]
    base_flip = None
    if fam.field == REAL:
        base_flip = np.outer(m0_values.astype(np.int64), nb[:, 0].astype(np.int64))
        for j in range(1, k):
            if fixed[j]:
                base_flip = base_flip + nb[:, j][None, :].astype(np.int64)
    per_m = np.zeros((count, n), dtype=np.int64)
    per_err = np.zeros((count, n))
    for i in range(n):
        j = struct.axis_of[i]
        if j is None:
            with np.errstate(over="ignore", under="ignore"):
                mags = np.exp(base_log[:, i])
            if fam.field == REAL:
                vals = np.where(base_flip[:, i] & 1 == 1, -mags, mags)
                errs = np.abs(vals - target.values[i])
                errs = np.where(np.sign(vals) == target.phase[i], errs, np.inf)
            else:
                vals = mags * np.exp(1j * np.mod(base_arg[:, i], 2 * np.pi))
                errs = np.abs(vals - target.values[i])
            per_err[:, i] = errs
            continue
        v = lm[i, j]
        p = parity[j] if parity is not None else _PARITY_FREE
        center = (target.logmag[i] - base_log[:, i]) / v
        base_round = _round_to_parity(center, int(p))
        step = 2 if (parity is not None and p != _PARITY_FREE) else 1
        offsets = np.arange(-window, window + 1) * step
        cand = base_round[:, None] + offsets[None, :]
        floor = float(p) if (parity is not None and p == 1) else 0.0
        cand = np.maximum(cand, floor)
        cand = np.minimum(cand, float(box[j]))
        if parity is not None and p != _PARITY_FREE:
            wrong = (cand.astype(np.int64) & 1) != int(p)
            cand = np.where(wrong, np.maximum(cand - 1, floor), cand)
        cand = cand.astype(np.int64)
        logs = base_log[:, i][:, None] + cand * v
        with np.errstate(over="ignore", under="ignore"):
            mags = np.exp(logs)
        if fam.field == REAL:
            flips = base_flip[:, i][:, None] + cand * int(nb[i, j])
            vals = np.where(flips & 1 == 1, -mags, mags)
            errs = np.abs(vals - target.values[i])
            errs = np.where(np.sign(vals) == target.phase[i], errs, np.inf)
        else:
            args = base_arg[:, i][:, None] + cand * fam.args[i, j]
            vals = mags * np.exp(1j * np.mod(args, 2 * np.pi))
            errs = np.abs(vals - target.values[i])
        pick = np.argmin(errs, axis=1)
        rows_idx = np.arange(count)
        per_m[:, i] = cand[rows_idx, pick]
        per_err[:, i] = errs[rows_idx, pick]
    total = np.max(per_err, axis=1)
    order = int(np.argmin(total))
    m = fixed.copy()
    m[0] = int(m0_values[order])
    for i in range(n):
        j = struct.axis_of[i]
        if j is not None:
            m[j] = int(per_m[order, i])
    if np.isfinite(total[order]):
        best.offer(m, float(total[order]))
    return count


def diag_solve_heuristic(
    g_or_fam, target: DiagTarget, cfg: SolveConfig, collector: list | None = None
) -> DiagSolveResult:
    """Sweep the generator-0 exponent, rounding the rest per parity class.

    Budget counts swept candidates; exhaustion returns the best-so-far with
    converged=False rather than raising.  Sign infeasibility (real case)
    raises InfeasibleError since no budget could ever fix it.  When a
    collector list is supplied, the per-chunk best candidates are appended
    to it and the sweep runs its full budget instead of stopping at tol.
    """
    fam = g_or_fam if isinstance(g_or_fam, DiagFamily) else family_from(g_or_fam)
    struct = _detect_structure(fam)
    box = cfg.box_array(fam.k)
    m0_cap = int(box[0])
    if cfg.min_m0 > m0_cap:
        raise InfeasibleError("min_m0 exceeds the generator-0 exponent box")
    classes = _parity_classes(fam, target) if fam.field == REAL else [None]
    per_class_budget = max(1, cfg.budget // max(1, len(classes)))
    best = _Best()
    nodes = 0
    for parity in classes:
        lo = cfg.min_m0
        step = 1
        if parity is not None and parity[0] != _PARITY_FREE:
            step = 2
            if (lo & 1) != int(parity[0]):
                lo += 1
        span = (m0_cap - lo) // step + 1 if m0_cap >= lo else 0
        count = min(per_class_budget, span)
        if count <= 0:
            continue
        m0_values = lo + step * np.arange(count, dtype=np.int64)
        for start in range(0, count, _CHUNK):
            chunk_best = _Best()
            nodes += _sweep_class(
                fam,
                target,
                cfg,
                struct,
                parity,
                m0_values[start : start + _CHUNK],
                chunk_best,
            )
            if chunk_best.m is not None:
                best.offer(chunk_best.m, chunk_best.err)
                if collector is not None and np.isfinite(chunk_best.err):
                    collector.append((chunk_best.m, chunk_best.err))
            if nodes >= cfg.budget or (collector is None and best.err <= cfg.tol):
                break
        if nodes >= cfg.budget or (collector is None and best.err <= cfg.tol):
            break
    if best.m is None:
        raise InfeasibleError("empty sweep range")
    nodes += _local_polish(fam, target, cfg, best)
    err = exact_error(fam, best.m, target)
    return DiagSolveResult(m=best.m, error=err, converged=err <= cfg.tol, nodes=nodes)


def _local_polish(fam, target, cfg, best: _Best, rounds: int = 64) -> int:
    """Single-coordinate +-1/+-2 moves, first-improvement, lexicographic ties."""
    box = cfg.box_array(fam.k)
    nodes = 0
    for _ in range(rounds):
        m, e = best.m, best.err
        moved = False
        for j in range(fam.k):
            for d in (-2, -1, 1, 2):
                cand = m.copy()
                cand[j] += d
                if cand[j] < 0 or cand[j] > box[j] or cand[0] < cfg.min_m0:
                    continue
                if not cand.any():
                    continue
                err = _candidate_errors(fam, cand[None, :], target, require_signs=True)[0]
                nodes += 1
                if err < e:
                    best.offer(cand, float(err))
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
    return nodes


def diag_solve(g_or_fam, target: DiagTarget, cfg: SolveConfig) -> DiagSolveResult:
    if cfg.mode == "exhaustive":
        return diag_solve_exhaustive(g_or_fam, target, cfg)
    return diag_solve_heuristic(g_or_fam, target, cfg)


# -- drift vector -----------------------------------------------------------------


def drift_vector_family(
    fam: DiagFamily, tol: float = DRIFT_TOL, max_coeff: int = DRIFT_MAX_COEFF
) -> np.ndarray:
    """Nonzero c >= 0 with sup-norm of sum_alpha c_alpha v_alpha below tol.

    v_alpha are the generator log-moduli columns.  Exists whenever the columns
    positively span the space; found by scanning coefficient tiers of
    increasing size (any all-zero column yields the immediate unit answer).
    """
    lm = fam.logmag
    k = fam.k
    for j in range(k):
        if np.all(np.abs(lm[:, j]) <= 1e-15):
            c = np.zeros(k, dtype=np.int64)
            c[j] = 1
            return c
    struct = _detect_structure(fam)
    if not struct.dense and all(a is not None for a in struct.axis_of):
        for c0 in range(1, max_coeff + 1):
            c = np.zeros(k, dtype=np.int64)
            c[0] = c0
            resid = c0 * lm[:, 0].copy()
            ok = True
            for i in range(fam.n):
                j = struct.axis_of[i]
                cj = int(round(-c0 * lm[i, 0] / lm[i, j]))
                if cj < 0:
                    ok = False
                    break
                c[j] += cj
                resid[i] += cj * lm[i, j]
            if ok and np.max(np.abs(resid)) <= tol:
                return c
        raise SpanningError(f"no drift vector with coefficients <= {max_coeff}")
    # generic tiered shell search, candidate-capped per tier
    cap_per_tier = 10**4
    for size in range(1, min(max_coeff, 50) + 1):
        count = 0
        stack = [(np.zeros(k, dtype=np.int64), 0, False)]
        while stack and count < cap_per_tier:
            c, idx, has_max = stack.pop()
            if idx == k:
                if has_max and np.any(c):
                    count += 1
                    if np.max(np.abs(lm @ c)) <= tol:
                        return c
                continue
            for v in range(size, -1, -1):
                nc = c.copy()
                nc[idx] = v
                stack.append((nc, idx + 1, has_max or v == size))
    raise SpanningError("no drift vector found by tiered search")


def drift_vector(
    g: GeneratorSet, tol: float = DRIFT_TOL, max_coeff: int = DRIFT_MAX_COEFF
) -> np.ndarray:
    key = ("drift", tol, max_coeff)
    if key not in g._cache:
        g._cache[key] = drift_vector_family(family_from(g), tol, max_coeff)
    return g._cache[key]
