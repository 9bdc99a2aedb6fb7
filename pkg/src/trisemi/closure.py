"""Words approximating diagonal targets over a full generator set.

A pure power of generator 0 carries off-diagonal freight; a pure diagonal
word cannot move magnitudes below/above what the D_j span.  Words here take
the segmented form

    (D^{s^1} A^{e_1}) (D^{s^2} A^{e_2}) ... (D^{s^K} A^{e_K})

whose diagonal depends only on the exponent totals (diagonals of triangular
products multiply coordinate-wise), while the split of the totals across
segments steers the off-diagonal entries.  The diagonal totals come from the
log-lattice solver; the splits are then chosen by exact enumeration (tail
segments) and greedy balancing (prefix segments) to cancel the off-diagonal
sum.  Segment exponents are capped so every partial product stays inside the
double-precision range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagengine as de
from .errors import InfeasibleError, InputError
from .genset import GeneratorSet, Word, eval_word
from .matcore import REAL, sup_norm, tri_eigendecompose

_SEG_LOG_BUDGET = 600.0


@dataclass
class ClosureResult:
    word: Word
    error: float
    converged: bool
    nodes: int


class PowerModel:
    """Batch closed-form powers of generator 0 via its eigendecomposition."""

    def __init__(self, g: GeneratorSet):
        a0 = g.gen0()
        self.n = g.n
        self.field = g.field
        f = tri_eigendecompose(a0)
        self.d = f.d
        # coeff[l] = outer(S[:, l], S^-1[l, :]) so A^e = sum_l coeff[l] * d_l^e
        s_inv = f.S_inv
        self.coeff = np.stack([np.outer(f.S[:, l], s_inv[l, :]) for l in range(self.n)])
        self.e_cap = int(_SEG_LOG_BUDGET / max(np.max(np.abs(np.log(np.abs(f.d)))), 1e-9))

    def powers(self, exps: np.ndarray) -> np.ndarray:
        """A^e for each e in exps, shape (batch, n, n)."""
        exps = np.asarray(exps, dtype=np.float64)
        with np.errstate(over="ignore", under="ignore"):
            dp = np.power(self.d[None, :], exps[:, None])  # (batch, n)
        return np.einsum("lij,bl->bij", self.coeff, dp)


def safe_box(fam: de.DiagFamily, margin: float = _SEG_LOG_BUDGET) -> np.ndarray:
    """Per-generator exponent caps keeping single factors representable."""
    caps = np.empty(fam.k, dtype=np.int64)
    for j in range(fam.k):
        worst = float(np.max(np.abs(fam.logmag[:, j])))
        caps[j] = (1 << 40) if worst < 1e-12 else max(1, int(margin / worst))
    return caps


def balanced_diag_word(g: GeneratorSet, m: np.ndarray) -> Word:
    """Word for a commuting (diagonal-only or scalar) exponent vector.

    Interleaves generator chunks so every prefix of the evaluation stays
    inside the representable range; valid whenever the factors commute
    (all-diagonal words, or any word at n = 1).
    """
    m = np.asarray(m, dtype=np.int64)
    fam = de.family_from(g)
    active = [j for j in range(m.size) if m[j] > 0]
    if not active:
        raise InputError("empty exponent vector")
    logs = fam.logmag
    # rounds sized so each round moves every coordinate by at most ~60 in log
    travel = max(
        (abs(float(logs[:, j].sum() if g.n == 1 else np.max(np.abs(logs[:, j])))) * int(m[j]))
        for j in active
    )
    rounds = max(1, int(math.ceil(travel / 60.0)))
    factors: list[tuple[int, int]] = []
    emitted = np.zeros_like(m)
    for r in range(1, rounds + 1):
        for j in active:
            share = (int(m[j]) * r) // rounds - int(emitted[j])
            if share > 0:
                factors.append((j, share))
                emitted[j] += share
    return Word.merged(factors)


# -- segmented construction -------------------------------------------------------


def _diag_values(fam: de.DiagFamily, rows: np.ndarray) -> np.ndarray:
    """Diagonal of D^rows for exponent rows over generators 1..k-1."""
    full = np.zeros((rows.shape[0], fam.k), dtype=np.int64)
    full[:, 1:] = rows
    return de.eval_exponents(fam, full)


def _assemble(fam, model, splits: list[tuple[np.ndarray, int]]) -> np.ndarray:
    """Exact evaluation of prod_kappa diag(D^{s_kappa}) A^{e_kappa}."""
    acc = np.eye(model.n, dtype=fam.cols.dtype)
    for s, e in splits:
        delta = _diag_values(fam, s[None, :])[0]
        block = model.powers(np.array([e]))[0] if e > 0 else np.eye(model.n, dtype=fam.cols.dtype)
        acc = acc @ (delta[:, None] * block)
    return acc


def _splits_to_word(splits: list[tuple[np.ndarray, int]]) -> Word:
    factors: list[tuple[int, int]] = []
    for s, e in splits:
        for j in range(s.size):
            if s[j] > 0:
                factors.append((j + 1, int(s[j])))
        if e > 0:
            factors.append((0, int(e)))
    return Word.merged(factors)


def _proportional_split(total: np.ndarray, num: int, den: int) -> np.ndarray:
    return (total.astype(np.int64) * num) // den


def _prefix_chain(fam, model, k_total, e_total):
    """Greedy balanced segments consuming exponents beyond the tail budget.

    Returns (splits, running product, remaining k, remaining e).  Each
    segment's diagonal share is chosen from a small menu around the
    proportional split by feedback against the proportional log-trajectory,
    so every partial product stays representable; the off-diagonal freight
    ratio is the tiebreaker.
    """
    k_total = np.asarray(k_total, dtype=np.int64)
    n_dgens = fam.k - 1
    splits: list[tuple[np.ndarray, int]] = []
    acc = np.eye(model.n, dtype=fam.cols.dtype)
    e_chunk = max(1, model.e_cap // 2)
    e_rem = int(e_total)
    emitted = np.zeros(n_dgens, dtype=np.int64)
    cum_e = 0
    offdiag = ~np.eye(model.n, dtype=bool)
    log_a = np.log(np.abs(fam.cols[:, 0]))
    while e_rem > _TAIL_E_MAX(model):
        e_seg = min(e_chunk, e_rem - _TAIL_E_MAX(model))
        cum_next = cum_e + e_seg
        base = (k_total * cum_next) // e_total - emitted
        base = np.maximum(base, 0)
        options = [base]
        for j in range(n_dgens):
            for d in (1, 2):
                for sgn in (+1, -1):
                    cand = base.copy()
                    cand[j] += sgn * d
                    if 0 <= cand[j] <= k_total[j] - emitted[j]:
                        options.append(cand)
        # proportional log-trajectory the running diagonal should track
        target_log = (
            cum_next * log_a
            + ((k_total * cum_next) / e_total) @ fam.logmag[:, 1:].T
        )
        block = model.powers(np.array([e_seg]))[0]
        best_opt, best_score, best_acc = None, np.inf, None
        for opt in options:
            if np.any(opt > k_total - emitted):
                continue
            delta = _diag_values(fam, opt[None, :])[0]
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                nxt = acc @ (delta[:, None] * block)
                dmag = np.abs(np.diag(nxt))
                if not np.all(np.isfinite(nxt)) or np.any(dmag == 0.0):
                    continue
                deviation = float(np.max(np.abs(np.log(dmag) - target_log)))
                freight = float(np.max(np.abs(nxt[offdiag])) / np.min(dmag)) if model.n > 1 else 0.0
            score = deviation + 0.25 * math.log1p(freight)
            if score < best_score:
                best_opt, best_score, best_acc = opt, score, nxt
        if best_opt is None:
            best_opt = base
            delta = _diag_values(fam, base[None, :])[0]
            best_acc = acc @ (delta[:, None] * block)
        splits.append((best_opt, e_seg))
        acc = best_acc
        emitted = emitted + best_opt
        cum_e = cum_next
        e_rem -= e_seg
    return splits, acc, k_total - emitted, e_rem


def _TAIL_E_MAX(model: PowerModel) -> int:
    return max(4, min(400, model.e_cap))


def _pair_enumerate(
    fam,
    model,
    prefix: np.ndarray,
    k_stage: np.ndarray,
    e_stage: int,
    target_vec: np.ndarray,
    budget: int,
):
    """Exact search over one segment pair minimizing the full sup error.

    Enumerates the A-split e2 and a mesh of diagonal splits; for each
    candidate the value prefix * (D^{k-j} A^{e1}) (D^{j} A^{e2}) is evaluated
    exactly against diag(target_vec).
    """
    n_dgens = fam.k - 1
    b_mat = np.diag(target_vec)
    e2_hi = min(e_stage - 1, _TAIL_E_MAX(model))
    if e_stage < 2 or e2_hi < 1:
        splits = [(k_stage.copy(), int(e_stage))]
        val = prefix @ _assemble(fam, model, splits)
        return splits, float(sup_norm(val - b_mat)), 1
    best_splits, best_err, nodes = None, np.inf, 0
    j_caps = np.array([min(int(k_stage[j]), 48) for j in range(n_dgens)], dtype=np.int64)
    order = np.argsort(-j_caps)
    mesh_dims = [int(d) for d in order if j_caps[d] > 0][:2]
    base_fix = [int(k_stage[d]) // 2 for d in range(n_dgens)]
    combos: list[np.ndarray] = []
    if not mesh_dims:
        combos = [np.array(base_fix, dtype=np.int64)]
    elif len(mesh_dims) == 1:
        for v in range(j_caps[mesh_dims[0]] + 1):
            c = np.array(base_fix, dtype=np.int64)
            c[mesh_dims[0]] = v
            combos.append(c)
    else:
        g1, g2 = mesh_dims
        for v1 in range(j_caps[g1] + 1):
            for v2 in range(j_caps[g2] + 1):
                c = np.array(base_fix, dtype=np.int64)
                c[g1], c[g2] = v1, v2
                combos.append(c)
    combos_arr = np.array(combos, dtype=np.int64)
    chunk = 1 << 12
    for e2 in range(1, e2_hi + 1):
        e1 = int(e_stage - e2)
        if e1 > 2 * model.e_cap:
            continue
        block2 = model.powers(np.array([e2]))[0]
        block1 = model.powers(np.array([e1]))[0]
        for start in range(0, combos_arr.shape[0], chunk):
            js = combos_arr[start : start + chunk]
            ii = k_stage[None, :] - js
            ok = np.all(ii >= 0, axis=1)
            js, ii = js[ok], ii[ok]
            if js.shape[0] == 0:
                continue
            d2 = _diag_values(fam, js)
            d1 = _diag_values(fam, ii)
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                p = d1[:, :, None] * block1[None, :, :]
                q = d2[:, :, None] * block2[None, :, :]
                vals = prefix[None, :, :] @ p @ q
                errs = np.max(np.abs(vals - b_mat[None, :, :]), axis=(1, 2))
            errs = np.where(np.isfinite(errs), errs, np.inf)
            nodes += js.shape[0]
            idx = int(np.argmin(errs))
            if errs[idx] < best_err:
                best_err = float(errs[idx])
                best_splits = [(ii[idx].copy(), e1), (js[idx].copy(), int(e2))]
            if nodes >= budget:
                break
        if nodes >= budget:
            break
    if best_splits is None:
        best_splits = [(k_stage.copy(), int(e_stage))]
        val = prefix @ _assemble(fam, model, best_splits)
        best_err = float(sup_norm(val - b_mat))
    return best_splits, best_err, nodes


def _steer(fam, model, prefix, k_rem, e_rem, b_vals, budget, goal):
    """Cancel off-diagonal freight with one enumerated segment pair.

    The closed-form centered search runs first (cheap); if it misses the
    goal, the exhaustive split mesh gets the remaining budget.
    """
    k_rem = k_rem.astype(np.int64)
    e_rem = int(e_rem)
    if model.n == 2:
        splits, err, nodes = _pair_enumerate_centered(
            fam, model, prefix, k_rem, e_rem, b_vals, max(1, budget // 3)
        )
        if err <= goal:
            return splits, err, nodes
        splits2, err2, nodes2 = _pair_enumerate(
            fam, model, prefix, k_rem, e_rem, b_vals, max(1, budget - nodes)
        )
        if err2 < err:
            return splits2, err2, nodes + nodes2
        return splits, err, nodes + nodes2
    return _pair_enumerate(fam, model, prefix, k_rem, e_rem, b_vals, budget)


def _pair_enumerate_centered(fam, model, prefix, k_stage, e_stage, target_vec, budget):
    """Two-segment search for n = 2 with the balance knob solved in closed form.

    With the second-segment share of the coordinate-1 generator called t, the
    corner entry of the word value is affine in w^t (w the generator's
    coordinate-1 entry) while every other entry is t-independent; two probes
    identify the affine map, the balance point comes from its root, and only
    a small window around it needs exact evaluation.
    """
    n_dgens = fam.k - 1
    b_mat = np.diag(target_vec)
    e2_hi = min(e_stage - 1, _TAIL_E_MAX(model))
    if e_stage < 2 or e2_hi < 1 or n_dgens < 2:
        splits = [(k_stage.copy(), int(e_stage))]
        val = prefix @ _assemble(fam, model, splits)
        return splits, float(sup_norm(val - b_mat)), 1
    # knob generator: widest span on coordinate 1; partner spans coordinate 2
    spans = [int(k_stage[j]) for j in range(n_dgens)]
    coord1 = [j for j in range(n_dgens) if abs(fam.logmag[0, j + 1]) > 1e-15]
    coord2 = [j for j in range(n_dgens) if abs(fam.logmag[1, j + 1]) > 1e-15]
    if not coord1 or not coord2:
        return _pair_enumerate(fam, model, prefix, k_stage, e_stage, target_vec, budget)
    knob = max(coord1, key=lambda j: spans[j])
    partner = max(coord2, key=lambda j: spans[j])
    if knob == partner:
        return _pair_enumerate(fam, model, prefix, k_stage, e_stage, target_vec, budget)
    w = complex(fam.cols[0, knob + 1])
    others = [j for j in range(n_dgens) if j not in (knob, partner)]
    partner_cap = min(spans[partner], 320)
    e2_values = np.arange(1, e2_hi + 1, dtype=np.int64)
    p2_values = np.arange(0, partner_cap + 1, dtype=np.int64)
    ee, pp = np.meshgrid(e2_values, p2_values, indexing="ij")
    ee, pp = ee.ravel(), pp.ravel()
    cap = max(1, budget // 8)
    if ee.size > cap:
        stride = int(np.ceil(ee.size / cap))
        ee, pp = ee[::stride], pp[::stride]
    nodes = 0
    best_splits, best_err = None, np.inf
    chunk = 1 << 13
    base_other = np.zeros(n_dgens, dtype=np.int64)
    for j in others:
        base_other[j] = spans[j] // 2
    log_w = math.log(abs(w))
    # keep the high probe's w^t inside double range
    t_hi_cap = min(int(k_stage[knob]), max(1, int(620.0 / log_w)))
    for start in range(0, ee.size, chunk):
        e2 = ee[start : start + chunk]
        p2 = pp[start : start + chunk]
        m = e2.size
        # corner(t) = z0 + z1 * w^t; probe both extremes, where one term
        # dominates, to avoid cancellation when estimating z0 and z1
        probes = []
        for t in (0, t_hi_cap):
            js = np.tile(base_other, (m, 1))
            js[:, partner] = p2
            js[:, knob] = t
            ii = k_stage[None, :] - js
            d2 = _diag_values(fam, js)
            d1 = _diag_values(fam, ii)
            e1 = (e_stage - e2).astype(np.int64)
            b1 = model.powers(e1)
            b2 = model.powers(e2)
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                vals = (
                    prefix[None, :, :]
                    @ (d1[:, :, None] * b1)
                    @ (d2[:, :, None] * b2)
                )
            probes.append(vals)
        corner_lo = probes[0][:, 1, 0]
        corner_hi = probes[1][:, 1, 0]
        nodes += 2 * m
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            log_z0 = np.log(np.abs(corner_lo))
            log_z1 = np.log(np.abs(corner_hi)) - t_hi_cap * log_w
            center = (log_z0 - log_z1) / log_w
        center = np.where(np.isfinite(center), center, 0.0)
        t_base = np.clip(np.round(center), 0, k_stage[knob]).astype(np.int64)
        for off in (-3, -2, -1, 0, 1, 2, 3):
            ts = np.clip(t_base + off, 0, k_stage[knob])
            js = np.tile(base_other, (m, 1))
            js[:, partner] = p2
            js[:, knob] = ts
            ii = k_stage[None, :] - js
            ok = np.all(ii >= 0, axis=1)
            if not np.any(ok):
                continue
            js_ok, ii_ok = js[ok], ii[ok]
            e2_ok = e2[ok]
            d2 = _diag_values(fam, js_ok)
            d1 = _diag_values(fam, ii_ok)
            b1 = model.powers((e_stage - e2_ok).astype(np.int64))
            b2 = model.powers(e2_ok)
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                vals = (
                    prefix[None, :, :]
                    @ (d1[:, :, None] * b1)
                    @ (d2[:, :, None] * b2)
                )
                errs = np.max(np.abs(vals - b_mat[None, :, :]), axis=(1, 2))
            errs = np.where(np.isfinite(errs), errs, np.inf)
            nodes += js_ok.shape[0]
            idx = int(np.argmin(errs))
            if errs[idx] < best_err:
                best_err = float(errs[idx])
                best_splits = [
                    (ii_ok[idx].copy(), int(e_stage - e2_ok[idx])),
                    (js_ok[idx].copy(), int(e2_ok[idx])),
                ]
        if nodes >= budget:
            break
    if best_splits is None:
        return _pair_enumerate(fam, model, prefix, k_stage, e_stage, target_vec, budget)
    return best_splits, best_err, nodes


def _diag_candidate_pool(fam, target, tol, budget, box, cap=8, min_m0=0):
    """Best diagonal-exponent solutions from one full sweep, stratified by m0.

    A single collector sweep yields the per-chunk best candidates; the pool
    keeps the overall best plus the strongest distinct-exponent runners-up.
    """
    collector: list[tuple[np.ndarray, float]] = []
    cfg = de.SolveConfig(tol=tol, budget=budget, box=tuple(box), min_m0=min_m0)
    try:
        de.diag_solve_heuristic(fam, target, cfg, collector=collector)
    except InfeasibleError:
        return []
    collector.sort(key=lambda c: (c[1], tuple(c[0])))
    pool: list[tuple[np.ndarray, float]] = []
    seen: set[int] = set()
    for m, err in collector:
        if int(m[0]) in seen:
            continue
        seen.add(int(m[0]))
        pool.append((m, err))
        if len(pool) >= cap:
            break
    return pool


def closure_word(
    g: GeneratorSet, b: np.ndarray, eps: float, budget: int = 10**6
) -> ClosureResult:
    """Approximate a nonsingular diagonal target by a word over the full set.

    Tries pure diagonal-generator words first (zero off-diagonal freight);
    otherwise picks diagonal exponent totals from the log-lattice solver and
    steers the off-diagonal entries to zero through segment splits.  The
    reported error is re-evaluated from the emitted word.
    """
    b = np.asarray(b)
    if b.ndim == 2:
        b_vals = np.diag(b)
    else:
        b_vals = b
    target = de.diag_log_target(b_vals)
    fam = de.family_from(g)
    # exponent totals get split across segments, so the box is set by search
    # range rather than single-factor representability
    box = np.full(fam.k, 1 << 20, dtype=np.int64)
    nodes = 0
    best: tuple[Word, float] | None = None

    def offer(word: Word) -> float:
        nonlocal best
        err = float(sup_norm(eval_word(g, word) - np.diag(b_vals)))
        if best is None or err < best[1]:
            best = (word, err)
        return err

    # stage 0: plain solve; a pure-diagonal exact hit needs no steering
    cfg0 = de.SolveConfig(tol=eps, budget=max(1, budget // 4), box=tuple(box))
    res0 = de.diag_solve_heuristic(fam, target, cfg0)
    nodes += res0.nodes
    if res0.m[0] == 0 and np.any(res0.m):
        err = offer(balanced_diag_word(g, res0.m))
        if err <= eps:
            return ClosureResult(best[0], best[1], True, nodes)
    if g.n == 1:
        # scalars commute; no off-diagonal to steer
        if np.any(res0.m):
            err = offer(balanced_diag_word(g, res0.m))
        return ClosureResult(best[0], best[1], best[1] <= eps, nodes)

    model = PowerModel(g)
    pool_budget = max(1, budget // 2)
    pool = _diag_candidate_pool(fam, target, 0.4 * eps, pool_budget, box, cap=6, min_m0=2)
    nodes += pool_budget if pool else 0
    steer_budget = max(budget // 8, (budget - nodes) // max(1, len(pool)))
    for m_cand, diag_err in pool:
        if diag_err > eps:
            continue
        e_total = int(m_cand[0])
        k_total = m_cand[1:].astype(np.int64)
        pre_splits, prefix, k_rem, e_rem = _prefix_chain(fam, model, k_total, e_total)
        tail_splits, err_est, used = _steer(
            fam, model, prefix, k_rem, e_rem, b_vals, steer_budget, eps
        )
        nodes += used
        word = _splits_to_word(pre_splits + tail_splits)
        err = offer(word)
        if err <= eps:
            return ClosureResult(best[0], best[1], True, nodes)
    if best is None:
        if np.any(res0.m):
            offer(balanced_diag_word(g, res0.m))
        else:
            offer(Word.of((1, 1)))
    return ClosureResult(best[0], best[1], best[1] <= eps, nodes)
