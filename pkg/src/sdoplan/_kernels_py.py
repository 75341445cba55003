"""Pure-numpy implementations of the simplex inner-loop kernels.

These are the reference semantics; `_simplex_kernels.pyx` mirrors them
operation-for-operation so both backends pick identical pivots.
"""

import numpy as np

# nonbasic/basic status codes shared with the solver
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3
FIXED = 4


def choose_entering(d, status, inv_scale, tol, bland=False):
    """Pick the entering column, or -1 when none is eligible.

    Columns at their lower bound (or free) enter when the reduced cost is
    below -tol; columns at their upper bound (or free) enter when it exceeds
    +tol.  Scores are reduced costs scaled by static column norms; the most
    negative score wins and ties resolve to the lowest index.  With
    ``bland=True`` the first eligible index wins outright (anti-cycling).
    """
    can_inc = ((status == AT_LOWER) | (status == FREE)) & (d < -tol)
    can_dec = ((status == AT_UPPER) | (status == FREE)) & (d > tol)
    if bland:
        eligible = np.flatnonzero(can_inc | can_dec)
        return int(eligible[0]) if eligible.size else -1
    score = np.full(d.shape[0], np.inf)
    score[can_inc] = (d * inv_scale)[can_inc]
    score[can_dec] = (-d * inv_scale)[can_dec]
    j = int(np.argmin(score))
    if not np.isfinite(score[j]):
        return -1
    return j


def ratio_test(x_basic, lo_basic, up_basic, w, sigma, gap_entering, tol_piv):
    """Largest step the entering variable can take before a bound blocks.

    ``w`` is the FTRAN'd entering column; basics move at rate ``-sigma * w``.
    Returns ``(step, pos, leaves_at_upper)`` where ``pos`` is the blocking
    basic's position, -1 for a bound flip of the entering variable, and -2
    when no bound blocks (unbounded ray).  Among blockers within a hair of
    the minimum ratio, the largest ``|w|`` wins for numerical stability,
    ties by lowest position.
    """
    rate = -sigma * w
    limit = np.full(rate.shape[0], np.inf)
    inc = rate > tol_piv
    dec = rate < -tol_piv
    limit[inc] = np.maximum(up_basic[inc] - x_basic[inc], 0.0) / rate[inc]
    limit[dec] = np.maximum(x_basic[dec] - lo_basic[dec], 0.0) / (-rate[dec])
    best = limit.min() if limit.size else np.inf
    if gap_entering <= best:
        if np.isinf(gap_entering):
            return np.inf, -2, False
        return gap_entering, -1, False
    cut = best + 1e-12 * (1.0 + abs(best))
    cand = np.flatnonzero(limit <= cut)
    pos = int(cand[np.argmax(np.abs(w[cand]))])
    return float(limit[pos]), pos, bool(rate[pos] > 0.0)


def update_inverse(binv, w, row):
    """Rank-1 product-form update of the dense basis inverse, in place.

    ``w`` is the FTRAN'd entering column and ``row`` the leaving position.
    Plain multiply-then-subtract ufuncs (no FMA fusion) keep this path
    bit-identical to the compiled kernel.
    """
    binv[row] /= w[row]
    col = w.copy()
    col[row] = 0.0
    binv -= col[:, None] * binv[row]
