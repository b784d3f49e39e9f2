"""Ellipsoidal gating and ranked (k-best) linear assignment."""

from __future__ import annotations

import heapq
import math
from itertools import count

import numpy as np
from scipy.optimize import linear_sum_assignment

from .gaussian import _cholesky, SingularInnovationError
from scipy.linalg import cho_solve


class InfeasibleAssignmentError(ValueError):
    """No assignment covers every row with a finite cost."""


def mahalanobis2(z_bar, S, z) -> float:
    d = np.asarray(z, dtype=float) - np.asarray(z_bar, dtype=float)
    c, low = _cholesky(np.atleast_2d(np.asarray(S, dtype=float)), SingularInnovationError)
    return float(d @ cho_solve((c, low), d, check_finite=False))


def gate(z_bar, S, z, threshold: float = 9.0) -> bool:
    """True when the squared Mahalanobis distance is within ``threshold``."""
    return mahalanobis2(z_bar, S, z) <= threshold


def _total(cost: np.ndarray, cols) -> float:
    return math.fsum(cost[i, j] for i, j in enumerate(cols))


def _solve(cost: np.ndarray, big: float, forced: dict, forbidden: frozenset):
    """Best completion of ``forced`` avoiding ``forbidden``; None if infeasible.

    ``cost`` has its forbidden entries replaced by ``big``, which exceeds twice
    the cost of any feasible assignment, so a completion through such an entry
    is infeasible.
    """
    m, n = cost.shape
    cols = dict(forced)
    if forced:
        used = set(forced.values())
        free_rows = [i for i in range(m) if i not in forced]
        free_cols = [j for j in range(n) if j not in used]
    else:
        free_rows, free_cols = list(range(m)), list(range(n))
    if free_rows:
        if len(free_cols) < len(free_rows):
            return None
        sub = cost[free_rows][:, free_cols]
        if forbidden:
            rpos = {r: i for i, r in enumerate(free_rows)}
            cpos = {c: j for j, c in enumerate(free_cols)}
            for i, j in forbidden:
                if i in rpos and j in cpos:
                    sub[rpos[i], cpos[j]] = big
        r, c = linear_sum_assignment(sub)
        if sub[r, c].sum() >= 0.5 * big:
            return None
        for ri, ci in zip(r, c):
            cols[free_rows[ri]] = free_cols[ci]
    assignment = tuple(cols[i] for i in range(m))
    return assignment


def murty_kbest(cost, k: int):
    """The ``k`` lowest-cost assignments of every row to a distinct column.

    ``cost`` is an ``m x n`` array (``m <= n``) with ``+inf`` marking
    forbidden pairs. Returns a list of ``(assignment, total_cost)`` pairs in
    nondecreasing cost order; the assignment gives the column of each row.
    Fewer than ``k`` pairs come back when fewer feasible assignments exist.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D array")
    if k < 1:
        raise ValueError("k must be positive")
    m, n = cost.shape
    if m == 0:
        return [((), 0.0)]
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise ValueError("cost entries must be finite or +inf")
    finite = np.isfinite(cost)
    # shift so every finite cost is nonnegative; totals shift by m * low
    low = cost[finite].min() if finite.any() else 0.0
    work = np.where(finite, cost - low, 0.0)
    big = 2.0 * m * (work.max() + 1.0) + 1.0
    work[~finite] = big

    def solve(forced, forbidden):
        a = _solve(work, big, forced, forbidden)
        return None if a is None else (_total(cost, a), a)

    first = solve({}, frozenset())
    if first is None:
        raise InfeasibleAssignmentError("no feasible assignment")
    tick = count()
    heap = [(first[0], first[1], next(tick), {}, frozenset())]
    out = []
    while heap and len(out) < k:
        total, assignment, _, forced, forbidden = heapq.heappop(heap)
        out.append((assignment, total))
        if len(out) == k:
            break
        # partition the remaining solution space of this node
        fixed = dict(forced)
        for row in range(m):
            if row in forced:
                continue
            banned = forbidden | {(row, assignment[row])}
            sol = solve(fixed, banned)
            if sol is not None:
                heapq.heappush(heap, (sol[0], sol[1], next(tick), dict(fixed), banned))
            fixed[row] = assignment[row]
    return out


def optimal_assignment(cost):
    """Single best assignment; ``(assignment, total_cost)``."""
    return murty_kbest(cost, 1)[0]
