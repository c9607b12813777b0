"""Dense linear programming by the two-phase simplex method.

Variables carry individual upper bounds handled implicitly (nonbasic
variables may rest at either bound), which keeps the tableau at one row per
constraint. Bland's rule guarantees termination; the Dantzig rule is
available for speed and falls back to Bland after a degenerate stretch.
Desk-scale only: the tableau is dense.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2

MAX_VARIABLES = 20_000


class LPError(Exception):
    pass


class LPInfeasibleError(LPError):
    pass


class LPUnboundedError(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    iterations: int


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, upper=None,
             maximize: bool = False, rule: str = "bland",
             tol: float = 1e-9, max_iter: int | None = None) -> LPResult:
    """Optimize c.x subject to a_ub.x <= b_ub, a_eq.x = b_eq, 0 <= x <= upper.

    ``upper`` may be None (all unbounded above), a scalar, or a vector with
    ``np.inf`` entries. Raises LPInfeasibleError / LPUnboundedError.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if n > MAX_VARIABLES:
        raise LPError(f"{n} variables exceeds the desk-scale limit {MAX_VARIABLES}")
    if maximize:
        c = -c

    blocks = []
    rhs = []
    kinds: list[str] = []
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        blocks.append(a_ub)
        rhs.append(np.atleast_1d(np.asarray(b_ub, dtype=float)))
        kinds += ["ub"] * a_ub.shape[0]
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        blocks.append(a_eq)
        rhs.append(np.atleast_1d(np.asarray(b_eq, dtype=float)))
        kinds += ["eq"] * a_eq.shape[0]
    if upper is None:
        ub = np.full(n, np.inf)
    elif np.isscalar(upper):
        ub = np.full(n, float(upper))
    else:
        ub = np.asarray(upper, dtype=float).copy()
    if not blocks:
        x = np.where((c < 0) & np.isfinite(ub), ub, 0.0)
        if np.any((c < 0) & ~np.isfinite(ub)):
            raise LPUnboundedError("objective is unbounded")
        value = float(c @ x)
        return LPResult(x, -value if maximize else value, 0)

    a = np.vstack(blocks)
    b = np.concatenate(rhs)
    m = a.shape[0]

    n_slack = kinds.count("ub")
    n_total = n + n_slack + m
    art0 = n + n_slack
    tableau = np.zeros((m, n_total))
    tableau[:, :n] = a
    slack_of_row: dict[int, int] = {}
    s = 0
    for r, kind in enumerate(kinds):
        if kind == "ub":
            tableau[r, n + s] = 1.0
            slack_of_row[r] = n + s
            s += 1
    for r in range(m):
        if b[r] < 0:               # keep initial basic values nonnegative
            tableau[r] *= -1.0
            b[r] = -b[r]

    full_upper = np.concatenate([ub, np.full(n_slack + m, np.inf)])
    status = np.full(n_total, _AT_LOWER, dtype=np.int8)
    basis = np.empty(m, dtype=int)
    for r in range(m):
        sl = slack_of_row.get(r)
        if sl is not None and tableau[r, sl] > 0:
            basis[r] = sl
        else:
            basis[r] = art0 + r
            tableau[r, art0 + r] = 1.0
    status[basis] = _BASIC
    xb = b.astype(float).copy()

    if max_iter is None:
        max_iter = 2000 + 60 * (m + n_total)

    phase1_cost = np.zeros(n_total)
    phase1_cost[art0:] = 1.0
    iters = _simplex_loop(tableau, xb, basis, status, full_upper,
                          phase1_cost, rule, tol, max_iter)
    residual = float(xb[basis >= art0].sum())
    if residual > 1e-7:
        raise LPInfeasibleError("no feasible point (phase 1 residual "
                                f"{residual:.3e})")
    full_upper[art0:] = 0.0        # artificials may never re-enter above zero

    phase2_cost = np.zeros(n_total)
    phase2_cost[:n] = c
    iters += _simplex_loop(tableau, xb, basis, status, full_upper,
                           phase2_cost, rule, tol, max_iter)

    x_full = np.zeros(n_total)
    nb_upper = (status == _AT_UPPER) & np.isfinite(full_upper)
    x_full[nb_upper] = full_upper[nb_upper]
    x_full[basis] = xb
    x = x_full[:n]
    value = float(c @ x)
    return LPResult(x, -value if maximize else value, iters)


def _simplex_loop(tableau, xb, basis, status, upper, cost, rule, tol, max_iter):
    m, n_total = tableau.shape
    iterations = 0
    degenerate_streak = 0
    while True:
        if iterations > max_iter:
            raise LPError(f"simplex exceeded {max_iter} iterations")
        iterations += 1

        reduced = cost - cost[basis] @ tableau
        movable = upper > tol
        enterable = ((status == _AT_LOWER) & (reduced < -tol) & movable) \
            | ((status == _AT_UPPER) & (reduced > tol))
        eligible = np.flatnonzero(enterable)
        if eligible.size == 0:
            return iterations

        if rule == "bland" or degenerate_streak > 40:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmax(np.abs(reduced[eligible]))])
        direction = 1.0 if status[j] == _AT_LOWER else -1.0
        w = direction * tableau[:, j]

        ratio_vals: list[np.ndarray] = []
        ratio_rows: list[np.ndarray] = []
        ratio_to: list[np.ndarray] = []
        pos = np.flatnonzero(w > tol)
        if pos.size:
            ratio_vals.append(np.maximum(xb[pos], 0.0) / w[pos])
            ratio_rows.append(pos)
            ratio_to.append(np.full(pos.size, _AT_LOWER, dtype=np.int8))
        neg = np.flatnonzero(w < -tol)
        if neg.size:
            finite = np.isfinite(upper[basis[neg]])
            neg = neg[finite]
            if neg.size:
                gap = np.maximum(upper[basis[neg]] - xb[neg], 0.0)
                ratio_vals.append(gap / (-w[neg]))
                ratio_rows.append(neg)
                ratio_to.append(np.full(neg.size, _AT_UPPER, dtype=np.int8))

        t_flip = upper[j]
        if ratio_vals:
            ratios = np.concatenate(ratio_vals)
            rows = np.concatenate(ratio_rows)
            tos = np.concatenate(ratio_to)
            t_rows = float(ratios.min())
        else:
            t_rows = np.inf
        if not np.isfinite(t_rows) and not np.isfinite(t_flip):
            raise LPUnboundedError("objective is unbounded")

        if t_rows <= t_flip:       # prefer a basis change on ties
            t = max(t_rows, 0.0)
            near = np.flatnonzero(ratios <= t_rows + tol)
            pick = near[np.argmin(basis[rows[near]])]   # Bland leaving rule
            leave_row = int(rows[pick])
            leave_to = int(tos[pick])

            xb -= t * w
            entering_value = t if direction > 0 else upper[j] - t
            status[basis[leave_row]] = leave_to
            status[j] = _BASIC
            basis[leave_row] = j

            piv = tableau[leave_row, j]
            pivot_row = tableau[leave_row] / piv
            col = tableau[:, j].copy()
            tableau -= np.outer(col, pivot_row)
            tableau[leave_row] = pivot_row
            xb[leave_row] = entering_value
            np.maximum(xb, 0.0, out=xb)
        else:                      # bound flip, basis unchanged
            t = t_flip
            xb -= t * w
            np.maximum(xb, 0.0, out=xb)
            status[j] = _AT_UPPER if status[j] == _AT_LOWER else _AT_LOWER

        degenerate_streak = degenerate_streak + 1 if t <= tol else 0
