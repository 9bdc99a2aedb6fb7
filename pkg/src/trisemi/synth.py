"""Constructive synthesis of words approximating lower-triangular targets.

Three layers:

* entry elimination: starting from generator 0 (diagonal plus perturbation),
  products of two prescribed-diagonal words cancel one off-diagonal entry at
  a time along the position order, converging to a word for the bare
  diagonal;
* diagonal closure (in :mod:`trisemi.closure`): words for arbitrary
  nonsingular diagonal targets;
* block factorization: a generic lower-triangular target factors exactly as
  [R 0; 0 x] * (D0 + T) * [S 0; 0 1], reducing dimension by one; the
  recursion synthesizes R over the truncated generators and repairs the
  bottom row with a diagonal sandwich.

Every emitted report re-evaluates its word; achieved_error is never an
estimate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagengine as de
from .closure import ClosureResult, closure_word, safe_box
from .errors import GenericityError, InputError
from .genset import GeneratorSet, Word, eval_word, require_valid
from .matcore import (
    field_of,
    growth_bound,
    is_lower_triangular,
    modulus_separation,
    sup_norm,
)
from .ordering import successor


# -- elimination cascade ------------------------------------------------------


@dataclass
class EliminationState:
    """Progress of the entry-elimination walk.

    word evaluates to (approximately) the base diagonal plus a perturbation
    supported at the anchor position and beyond; residual is the evaluated
    deviation from the base diagonal.  anchor is None once the walk is done.
    """

    anchor: tuple[int, int] | None
    word: Word
    residual: np.ndarray


def initial_state(g: GeneratorSet) -> EliminationState:
    word = Word.of((0, 1))
    residual = g.gen0() - np.diag(g.a)
    anchor = (2, 1) if g.n >= 2 else None
    return EliminationState(anchor=anchor, word=word, residual=residual)


def limit_corner_value(g: GeneratorSet, state: EliminationState, b_rr) -> complex:
    """Limiting corner entry of an anchored word: B_rr * t_rs / (a_r - a_s)."""
    r, s = state.anchor
    t_rs = state.residual[r - 1, s - 1]
    return b_rr * t_rs / (g.a[r - 1] - g.a[s - 1])


def ideal_corner_matrix(g: GeneratorSet, state: EliminationState, b_diag) -> np.ndarray:
    """diag(b) with the anchor entry at its limiting value (exact arithmetic)."""
    r, s = state.anchor
    m = np.diag(np.asarray(b_diag, dtype=g.a.dtype))
    m[r - 1, s - 1] = limit_corner_value(g, state, b_diag[r - 1])
    return m


def _growth_constant(g: GeneratorSet) -> float:
    if "growth" not in g._cache:
        g._cache["growth"] = growth_bound(g.gen0())
    return g._cache["growth"]


def anchored_diag_word(
    g: GeneratorSet,
    state: EliminationState,
    b_diag: np.ndarray,
    delta: float,
    cfg: de.SolveConfig,
) -> tuple[Word, de.DiagSolveResult]:
    """Word whose value has diagonal near b and controlled anchor entry.

    The word is (diagonal-generator powers) * (state.word)^{m0}; the floor on
    m0 makes the anchor-column ratio (|a_s|/|a_r|)^{m0} negligible against
    delta, so the anchor entry lands near its limiting value while every
    entry before the anchor stays below delta.
    """
    if state.anchor is None:
        raise InputError("elimination already finished")
    r, s = state.anchor
    b_diag = np.asarray(b_diag)
    lam = _growth_constant(g)
    ratio = abs(g.a[s - 1]) / abs(g.a[r - 1])
    bnorm = float(np.max(np.abs(b_diag)))
    min_m0 = max(1, int(math.ceil(math.log(delta / (lam * bnorm)) / math.log(ratio))))
    cur = eval_word(g, state.word)
    fam = de.family_from(g, gen0_diag=np.diag(cur))
    box = safe_box(fam)
    if min_m0 > box[0]:
        raise InputError(
            f"suppression floor m0={min_m0} exceeds the representable power cap {box[0]}"
        )
    cfg2 = de.SolveConfig(
        tol=delta / 2, budget=cfg.budget, box=tuple(box), min_m0=min_m0, mode=cfg.mode
    )
    res = de.diag_solve(fam, de.diag_log_target(b_diag), cfg2)
    factors = [(j, int(res.m[j])) for j in range(1, fam.k) if res.m[j] > 0]
    word = Word.merged(factors) + state.word.repeat(int(res.m[0]))
    return word, res


def eliminate_entry(
    g: GeneratorSet, state: EliminationState, delta: float, cfg: de.SolveConfig
) -> EliminationState:
    """One elimination step: cancel the anchor entry, advance the anchor.

    Uses the prescribed pair B2 = diag(1,..,-1@r,..,1), B1 = B2 * D0: the
    product of their anchored words has diagonal near the base diagonal and
    anchor entry near zero by the telescoping of the limiting values.
    """
    if state.anchor is None:
        raise InputError("elimination already finished")
    r, _ = state.anchor
    b2 = np.ones(g.n, dtype=g.a.dtype)
    b2[r - 1] = -1.0
    b1 = b2 * g.a
    w1, res1 = anchored_diag_word(g, state, b1, delta / 2, cfg)
    w2, res2 = anchored_diag_word(g, state, b2, delta / 2, cfg)
    word = w1 + w2
    residual = eval_word(g, word) - np.diag(g.a)
    return EliminationState(
        anchor=successor(state.anchor, g.n), word=word, residual=residual
    )


def run_cascade(
    g: GeneratorSet, delta: float, budget: int = 4 * 10**6
) -> EliminationState:
    """Full elimination walk from (2,1) to (n,1); cached per generator set."""
    key = ("cascade", float(delta))
    if key in g._cache:
        return g._cache[key]
    require_valid(g)
    cfg = de.SolveConfig(tol=delta, budget=budget)
    state = initial_state(g)
    while state.anchor is not None:
        state = eliminate_entry(g, state, delta, cfg)
    g._cache[key] = state
    return state


# -- block factorization ---------------------------------------------------------


@dataclass(frozen=True)
class FactorParts:
    """Exact factorization B = [R 0; 0 x] * A * [S 0; 0 1] for generic B."""

    R: np.ndarray
    x: complex
    S: np.ndarray  # diagonal entries, shape (n-1,)


def factor_target(b: np.ndarray, a_mat: np.ndarray) -> FactorParts:
    """Solve the factorization for a generic target.

    Requires the target's last diagonal entry and entire bottom row nonzero
    and the leading block invertible; the generator matrix supplies a
    nonvanishing bottom row by construction.
    """
    b = np.asarray(b)
    a_mat = np.asarray(a_mat)
    n = b.shape[0]
    if n < 2:
        raise InputError("factorization needs dimension >= 2")
    z = b[n - 1, n - 1]
    w_row = b[n - 1, : n - 1]
    u = b[: n - 1, : n - 1]
    a_n = a_mat[n - 1, n - 1]
    v_row = a_mat[n - 1, : n - 1]
    a_lead = a_mat[: n - 1, : n - 1]
    if z == 0:
        raise GenericityError("target corner entry is zero")
    if np.any(w_row == 0):
        raise GenericityError("target bottom row has a zero entry")
    if np.any(np.diag(u) == 0):
        raise GenericityError("leading block is singular")
    if np.any(v_row == 0):
        raise GenericityError("generator bottom row has a zero entry")
    x = z / a_n
    s = w_row / (x * v_row)
    m = u / s[None, :]
    r = np.linalg.solve(a_lead.T, m.T).T
    return FactorParts(R=r, x=x, S=s)


def reassemble(parts: FactorParts, a_mat: np.ndarray) -> np.ndarray:
    n = a_mat.shape[0]
    left = np.zeros_like(a_mat)
    left[: n - 1, : n - 1] = parts.R
    left[n - 1, n - 1] = parts.x
    right = np.diag(np.concatenate([parts.S, [1.0]]).astype(a_mat.dtype))
    return left @ a_mat @ right


def perturb_generic(b: np.ndarray, delta: float, seed: int = 0) -> np.ndarray:
    """Nudge a lower-triangular target into the generic region.

    Ensures, at every recursion level: nonzero corner, nonzero bottom row,
    invertible leading block with modulus-separated diagonal.  Entries
    already satisfying the requirements are untouched; each adjustment stays
    within delta in sup norm and is deterministic in the seed.
    """
    b = np.asarray(b).copy()
    if delta <= 0:
        raise InputError("delta must be positive")
    n = b.shape[0]
    rng = np.random.default_rng(seed)
    comp = np.iscomplexobj(b)
    floor = delta / 4

    def bump(scale: float) -> complex:
        u = rng.uniform(0.5, 1.0)
        if comp:
            phase = rng.uniform(0, 2 * math.pi)
            return scale * u * complex(math.cos(phase), math.sin(phase))
        return scale * u * (1 if rng.uniform() < 0.5 else -1)

    # bottom rows and corners at every level
    for k in range(n, 1, -1):
        for j in range(k):
            if abs(b[k - 1, j]) < floor:
                old = b[k - 1, j]
                b[k - 1, j] = old + bump(2 * floor) if old == 0 else (
                    old / abs(old) * floor * rng.uniform(1.0, 1.5)
                )
    if abs(b[0, 0]) < floor:
        old = b[0, 0]
        b[0, 0] = old + bump(2 * floor) if old == 0 else old / abs(old) * floor
    # modulus separation of the diagonal, applied from the top
    guard = 0
    while modulus_separation(np.diag(b)) < 1.0 + 1e-9 and guard < 8 * n:
        mods = np.abs(np.diag(b))
        order = np.argsort(mods)
        for t in range(1, n):
            i_prev, i_cur = order[t - 1], order[t]
            if mods[i_cur] < mods[i_prev] * (1.0 + 1e-9) + 1e-300:
                scale = 1.0 + (floor / max(mods[i_cur], floor)) * rng.uniform(0.2, 0.5)
                b[i_cur, i_cur] = b[i_cur, i_cur] * scale
        guard += 1
    return b


def _is_generic(b: np.ndarray) -> bool:
    n = b.shape[0]
    for k in range(n, 1, -1):
        if b[k - 1, k - 1] == 0 or np.any(b[k - 1, :k - 1] == 0):
            return False
    if b[0, 0] == 0:
        return False
    return modulus_separation(np.diag(b)) >= 1.0 + 1e-9


# -- reports ----------------------------------------------------------------------


@dataclass
class ApproxReport:
    """Honest synthesis outcome: the error is re-evaluated from the word."""

    target: np.ndarray
    word: Word
    achieved_error: float
    converged: bool
    eps: float
    stats: dict = field(default_factory=dict)


def make_report(
    g: GeneratorSet,
    word: Word,
    target: np.ndarray,
    eps: float,
    nodes: int,
    retries: int,
    started: float,
) -> ApproxReport:
    err = float(sup_norm(eval_word(g, word) - target))
    return ApproxReport(
        target=np.asarray(target),
        word=word,
        achieved_error=err,
        converged=err <= eps,
        eps=eps,
        stats={
            "nodes": int(nodes),
            "retries": int(retries),
            "wall_time_s": time.perf_counter() - started,
            "word_length": len(word),
        },
    )


def diag_closure_word(
    g: GeneratorSet, b: np.ndarray, eps: float, budget: int = 2 * 10**6
) -> ApproxReport:
    """Word approximating a nonsingular diagonal target over the full set."""
    started = time.perf_counter()
    require_valid(g)
    b = np.asarray(b)
    b_mat = np.diag(np.diag(b)) if b.ndim == 2 else np.diag(b)
    res = closure_word(g, np.diag(b_mat), eps, budget=budget)
    return make_report(g, res.word, b_mat, eps, res.nodes, 0, started)


# -- recursive triangular synthesis ------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    eps: float
    budget: int = 2 * 10**6
    seed: int = 0
    retries: int = 3
    x_floor: float = 1e-8


def _exact_generator_match(g: GeneratorSet, b: np.ndarray) -> Word | None:
    for gid in range(0, len(g.D) + 1):
        if np.array_equal(g.generator(gid), b):
            return Word.of((gid, 1))
    return None


def _balance_corner(g: GeneratorSet, w: Word, level: int) -> tuple[Word, np.ndarray]:
    """Append powers of the level's own diagonal generator to tame the corner.

    Generator `level` truncates to the identity below dimension `level`, so
    appending it leaves the synthesized block untouched while rescaling the
    evaluated corner entry toward unit size.
    """
    l_mat = eval_word(g, w, level)
    corner = l_mat[level - 1, level - 1]
    d_val = g.D[level - 1][level - 1]
    if corner == 0 or abs(d_val) == 1.0:
        return w, l_mat
    steps = int(round(-math.log(abs(corner)) / math.log(abs(d_val))))
    if steps > 0:
        w = w + Word.of((level, steps))
        l_mat = eval_word(g, w, level)
    return w, l_mat


def approx_triangular(
    g: GeneratorSet, b: np.ndarray, eps: float, budget: int = 2 * 10**6, seed: int = 0
) -> ApproxReport:
    """Synthesize a word approximating a lower-triangular target.

    Recursive: generic perturbation, exact block factorization, synthesis of
    the leading block over the truncated generators, then a diagonal sandwich
    repairing the bottom row and the column scaling.  Sub-tolerances shrink
    on retry until the honestly evaluated error meets eps or retries run out.
    """
    started = time.perf_counter()
    require_valid(g)
    b = np.asarray(b, dtype=g.a.dtype)
    if b.shape != (g.n, g.n):
        raise InputError(f"target shape {b.shape} does not match dimension {g.n}")
    if not is_lower_triangular(b):
        bad = [
            (i + 1, j + 1)
            for i in range(g.n)
            for j in range(i + 1, g.n)
            if b[i, j] != 0
        ][0]
        raise InputError(f"target is not lower triangular at entry {bad}")
    word_exact = _exact_generator_match(g, b)
    if word_exact is not None:
        return make_report(g, word_exact, b, eps, 0, 0, started)
    cfg = SynthConfig(eps=eps, budget=budget, seed=seed)
    word, nodes, retries = _synthesize(g, b, eps, cfg, depth=0)
    return make_report(g, word, b, eps, nodes, retries, started)


def _synthesize(
    g: GeneratorSet, b: np.ndarray, eps: float, cfg: SynthConfig, depth: int
) -> tuple[Word, int, int]:
    n = g.n
    nodes = 0
    if n == 1:
        val = b[0, 0]
        if val == 0:
            val = eps / 4
        res = closure_word(g, np.array([val]), max(eps / 2, 1e-14), budget=cfg.budget)
        return res.word, res.nodes, 0
    best_word: Word | None = None
    best_err = np.inf
    sub_scale = 1.0
    retries_used = 0
    for attempt in range(cfg.retries + 1):
        seed = cfg.seed + 7919 * depth + attempt
        word, used = _attempt(g, b, eps, cfg, seed, sub_scale, depth)
        nodes += used
        if word is not None:
            err = float(sup_norm(eval_word(g, word) - b))
            if err < best_err:
                best_word, best_err = word, err
            if err <= eps:
                return word, nodes, attempt
        sub_scale *= 0.5
        retries_used = attempt + 1
    if best_word is None:
        # degenerate fallback: the generator itself, honestly reported
        best_word = Word.of((0, 1))
    return best_word, nodes, retries_used


def _attempt(
    g: GeneratorSet,
    b: np.ndarray,
    eps: float,
    cfg: SynthConfig,
    seed: int,
    sub_scale: float,
    depth: int,
) -> tuple[Word | None, int]:
    n = g.n
    nodes = 0
    b_gen = b if _is_generic(b) else perturb_generic(b, eps / 4, seed)
    try:
        parts = factor_target(b_gen, g.gen0())
    except GenericityError:
        b_gen = perturb_generic(b, eps / 4, seed + 1)
        parts = factor_target(b_gen, g.gen0())
    rem = 0.75 * eps * sub_scale
    scale_r = max(1.0, float(np.max(np.abs(parts.S))))
    eps_r = rem / (6.0 * scale_r)
    g_sub = g.truncated(n - 1)
    r_target = np.asarray(parts.R, dtype=g.a.dtype)
    w_r, used, _ = _synthesize(g_sub, r_target, eps_r, cfg, depth + 1)
    nodes += used
    w_r, l_mat = _balance_corner(g, w_r, n)
    x_tilde = l_mat[n - 1, n - 1]
    if abs(x_tilde) < cfg.x_floor:
        return None, nodes
    v_row = l_mat[n - 1, : n - 1]
    v_norm = float(np.max(np.abs(v_row))) if n > 1 else 0.0
    a_norm = float(sup_norm(g.gen0()))
    s_norm = max(1.0, float(np.max(np.abs(parts.S))))
    eps_v = rem / (6.0 * max(1.0, a_norm * s_norm))
    a_scalar = eps_v / (1.0 + v_norm)
    d_left = np.ones(n, dtype=g.a.dtype)
    d_left[n - 1] = a_scalar
    d_right = np.ones(n, dtype=g.a.dtype)
    d_right[n - 1] = parts.x / (a_scalar * x_tilde)
    d_s = np.ones(n, dtype=g.a.dtype)
    d_s[: n - 1] = parts.S
    sandwich_norm = max(1.0, float(np.max(np.abs(d_right))), float(np.max(np.abs(b))))
    tol_left = max(rem / 6.0, a_scalar * 0.25)
    tol_right = rem / (6.0 * max(1.0, s_norm * a_norm)) * max(1.0, abs(d_right[n - 1]))
    tol_s = rem / (6.0 * max(1.0, a_norm * sandwich_norm / max(s_norm, 1e-12)))
    res_left = closure_word(g, d_left, tol_left, budget=cfg.budget)
    nodes += res_left.nodes
    res_right = closure_word(g, d_right, tol_right, budget=cfg.budget)
    nodes += res_right.nodes
    res_s = closure_word(g, d_s, tol_s, budget=cfg.budget)
    nodes += res_s.nodes
    word = res_left.word + w_r + res_right.word + Word.of((0, 1)) + res_s.word
    return word, nodes
