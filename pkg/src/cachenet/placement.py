"""Content placement: reservation packing, single-copy coverage, knapsack
top-up, and the outer searches over the reservation fraction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lp import LPInfeasibleError, solve_lp

BRUTE_FORCE_LIMIT = 22


class PlacementInfeasibleError(Exception):
    """No placement can cover every video within the node capacities."""


@dataclass
class Placement:
    """Per-node cached video sets."""

    cached: list[set[int]]

    def node_count(self) -> int:
        return len(self.cached)

    def holder_map(self, video_count: int) -> list[tuple[int, ...]]:
        holders: list[list[int]] = [[] for _ in range(video_count)]
        for i, videos in enumerate(self.cached):
            for k in videos:
                holders[k].append(i)
        return [tuple(sorted(h)) for h in holders]

    def indicator(self, video_count: int) -> np.ndarray:
        y = np.zeros((len(self.cached), video_count), dtype=bool)
        for i, videos in enumerate(self.cached):
            if videos:
                y[i, sorted(videos)] = True
        return y

    def within_capacity(self, sizes: np.ndarray, capacities: np.ndarray) -> bool:
        return all(sum(sizes[k] for k in s) <= capacities[i] + 1e-6
                   for i, s in enumerate(self.cached))

    def covers_all(self, video_count: int) -> bool:
        seen: set[int] = set()
        for s in self.cached:
            seen |= s
        return len(seen) == video_count

    def to_text(self) -> str:
        lines = []
        for i, videos in enumerate(self.cached):
            lines.append(" ".join([str(i)] + [str(k) for k in sorted(videos)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Placement":
        rows: dict[int, set[int]] = {}
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            rows[int(parts[0])] = {int(x) for x in parts[1:]}
        count = max(rows) + 1 if rows else 0
        return cls([rows.get(i, set()) for i in range(count)])


@dataclass
class PlacementResult:
    placement: Placement
    objective: float
    alpha_used: float | None
    feasible: bool
    fully_covered_by_reservation: bool = False
    alpha_threshold: float | None = None   # largest feasible fraction found


def weighted_hit_value(placement: Placement, demand: np.ndarray,
                       sizes: np.ndarray) -> float:
    total = 0.0
    for i, videos in enumerate(placement.cached):
        if videos:
            ks = sorted(videos)
            total += float(np.dot(sizes[ks], demand[i, ks]))
    return total


def hit_ratio(placement: Placement, demand: np.ndarray, sizes: np.ndarray) -> float:
    denom = float((demand * sizes[None, :]).sum())
    if denom <= 0:
        raise ValueError("total demand is zero")
    return weighted_hit_value(placement, demand, sizes) / denom


def reservation_packing(demand: np.ndarray, sizes: np.ndarray,
                        capacities: np.ndarray, alpha: float,
                        ) -> tuple[list[set[int]], np.ndarray, set[int]]:
    """Greedy packing of the most requested pairs into an alpha-sized budget.

    Pairs (node, video) are visited in decreasing demand order, ties broken
    lexicographically; a pair is taken when both the system budget
    alpha * sum(capacities) and the node's residual capacity admit the video.
    Returns the per-node sets, the residual capacities, and the covered set.
    """
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    m, n = demand.shape
    budget = alpha * float(capacities.sum())
    residual = capacities.astype(float).copy()
    sets: list[set[int]] = [set() for _ in range(m)]

    nodes, videos = np.unravel_index(np.arange(m * n), (m, n))
    order = np.lexsort((videos, nodes, -demand.ravel()))
    min_size = float(sizes.min()) if n else 0.0
    for idx in order:
        if budget < min_size:
            break
        i = int(nodes[idx])
        k = int(videos[idx])
        s = float(sizes[k])
        if s <= budget and s <= residual[i]:
            sets[i].add(k)
            budget -= s
            residual[i] -= s
    covered = set().union(*sets) if sets else set()
    return sets, residual, covered


def ocmhp_greedy(remaining: Sequence[int], residual: np.ndarray,
                 demand: np.ndarray, sizes: np.ndarray,
                 rule: str = "max_regret") -> list[set[int]] | None:
    """Place each remaining video on exactly one node, or report None.

    Feasible node sets are recomputed every round. With the default rule the
    video with the largest regret (best minus second-best demand over its
    feasible nodes) is committed first; videos with a single feasible node
    are forced ahead of everything. ``rule="min_diff"`` keeps the alternate
    convention of maximizing min-over-others minus best.
    """
    if rule not in ("max_regret", "min_diff"):
        raise ValueError(f"unknown OCMHP rule {rule!r}")
    m = residual.size
    additions: list[set[int]] = [set() for _ in range(m)]
    todo = sorted(remaining)
    if not todo:
        return additions
    resid = residual.astype(float).copy()
    lam = demand[:, todo]          # (m, |todo|) view in todo order
    size_row = sizes[todo]
    alive = np.ones(len(todo), dtype=bool)

    for _ in range(len(todo)):
        feasible = resid[:, None] >= size_row[None, :]     # (m, t)
        feasible[:, ~alive] = False
        open_counts = feasible.sum(axis=0)
        if np.any(alive & (open_counts == 0)):
            return None
        masked = np.where(feasible, lam, -np.inf)
        best = masked.max(axis=0)
        best_node = masked.argmax(axis=0)
        with np.errstate(invalid="ignore"):
            if rule == "max_regret":
                second = np.partition(masked, m - 2, axis=0)[m - 2] if m >= 2 \
                    else np.full(len(todo), -np.inf)
                score = np.where(open_counts == 1, np.inf, best - second)
            else:
                others = np.where(feasible, lam, np.inf)
                others[best_node, np.arange(len(todo))] = np.inf
                low = others.min(axis=0)
                score = np.where(open_counts == 1, np.inf, low - best)
        score[np.isnan(score)] = -np.inf
        score[~alive] = -np.inf
        pick = int(np.argmax(score))      # ties: lowest video id via argmax
        node = int(best_node[pick])
        video = todo[pick]
        additions[node].add(video)
        resid[node] -= size_row[pick]
        alive[pick] = False
        if not alive.any():
            break
    return additions


def knapsack_fill(lam_row: np.ndarray, sizes: np.ndarray,
                  candidates: Sequence[int], budget: float) -> set[int]:
    """Greedy 0/1 knapsack by decreasing profit density.

    Profit of video k is demand * size, so the density is the demand itself;
    items that do not fit are skipped and the budget is never exceeded.
    """
    chosen: set[int] = set()
    if budget <= 0 or not len(candidates):
        return chosen
    cand = np.asarray(sorted(candidates), dtype=int)
    order = cand[np.lexsort((cand, -lam_row[cand]))]
    left = float(budget)
    for k in order:
        s = float(sizes[k])
        if s <= left:
            chosen.add(int(k))
            left -= s
    return chosen


def alpha_mhp(demand: np.ndarray, sizes: np.ndarray, capacities: np.ndarray,
              alpha: float, ocmhp_rule: str = "max_regret") -> PlacementResult:
    """Reserve, cover, then top up; the composed placement heuristic."""
    m, n = demand.shape
    sets, residual, covered = reservation_packing(demand, sizes, capacities, alpha)
    remaining = sorted(set(range(n)) - covered)
    fully_covered = not remaining

    if remaining:
        additions = ocmhp_greedy(remaining, residual, demand, sizes, rule=ocmhp_rule)
        if additions is None:
            partial = Placement([set(s) for s in sets])
            return PlacementResult(partial, weighted_hit_value(partial, demand, sizes),
                                   alpha, feasible=False)
        for i in range(m):
            for k in additions[i]:
                sets[i].add(k)
                residual[i] -= sizes[k]

    for i in range(m):
        extra = knapsack_fill(demand[i], sizes, sorted(set(range(n)) - sets[i]),
                              residual[i])
        sets[i] |= extra

    placement = Placement(sets)
    return PlacementResult(placement, weighted_hit_value(placement, demand, sizes),
                           alpha, feasible=True,
                           fully_covered_by_reservation=fully_covered)


def srs(demand: np.ndarray, sizes: np.ndarray, capacities: np.ndarray,
        precision: float = 0.005,
        ocmhp_rule: str = "max_regret") -> PlacementResult:
    """Binary search the reservation fraction for the best objective.

    Evaluates alpha = 0 first (failure there means the whole problem is
    infeasible) and alpha = 1 (returned outright when feasible), then
    bisects toward the feasibility threshold to the requested precision.
    The best objective among the evaluated feasible fractions is returned;
    on instances where the objective is monotone up to the threshold this
    is the result at the largest feasible alpha found.
    """
    if precision <= 0:
        raise ValueError("precision must be > 0")

    low = alpha_mhp(demand, sizes, capacities, 0.0, ocmhp_rule)
    if not low.feasible:
        return low
    high = alpha_mhp(demand, sizes, capacities, 1.0, ocmhp_rule)
    if high.feasible:
        best = high if high.objective >= low.objective else low
        best.alpha_threshold = 1.0
        return best

    lo, hi = 0.0, 1.0
    best = low
    while hi - lo > precision:
        mid = (lo + hi) / 2.0
        res = alpha_mhp(demand, sizes, capacities, mid, ocmhp_rule)
        if res.feasible:
            lo = mid
            if res.objective > best.objective:
                best = res
        else:
            hi = mid
    best.alpha_threshold = lo
    return best


def irs(demand: np.ndarray, sizes: np.ndarray, capacities: np.ndarray,
        alpha_step: float = 0.01,
        ocmhp_rule: str = "max_regret") -> PlacementResult:
    """Per-node reservation baseline: every node keeps the same fraction of
    its own storage for its top videos; the best feasible grid point wins."""
    if alpha_step <= 0:
        raise ValueError("alpha_step must be > 0")
    m, n = demand.shape
    best: PlacementResult | None = None
    steps = int(round(1.0 / alpha_step))
    for s in range(steps + 1):
        alpha = min(1.0, s * alpha_step)
        sets: list[set[int]] = []
        residual = capacities.astype(float).copy()
        for i in range(m):
            reserved = knapsack_fill(demand[i], sizes, range(n),
                                     alpha * capacities[i])
            sets.append(reserved)
            residual[i] -= sum(sizes[k] for k in reserved)
        covered = set().union(*sets) if sets else set()
        remaining = sorted(set(range(n)) - covered)
        additions = ocmhp_greedy(remaining, residual, demand, sizes, rule=ocmhp_rule)
        if additions is None:
            continue
        for i in range(m):
            for k in additions[i]:
                sets[i].add(k)
                residual[i] -= sizes[k]
        for i in range(m):
            sets[i] |= knapsack_fill(demand[i], sizes,
                                     sorted(set(range(n)) - sets[i]), residual[i])
        placement = Placement(sets)
        value = weighted_hit_value(placement, demand, sizes)
        if best is None or value > best.objective:
            best = PlacementResult(placement, value, alpha, feasible=True)
    if best is None:
        return PlacementResult(Placement([set() for _ in range(m)]), 0.0,
                               None, feasible=False)
    return best


def lp_upper_bound(demand: np.ndarray, sizes: np.ndarray,
                   capacities: np.ndarray) -> float:
    """Optimal value of the fractional relaxation; an upper bound on any
    placement objective. Desk scale only (dense in-repo solver)."""
    m, n = demand.shape
    profit = (demand * sizes[None, :]).ravel()
    a_ub = np.zeros((m + n, m * n))
    b_ub = np.zeros(m + n)
    for i in range(m):
        a_ub[i, i * n:(i + 1) * n] = sizes
        b_ub[i] = capacities[i]
    for k in range(n):
        a_ub[m + k, k::n] = -1.0
        b_ub[m + k] = -1.0
    try:
        res = solve_lp(profit, a_ub, b_ub, upper=1.0, maximize=True,
                       rule="dantzig")
    except LPInfeasibleError as exc:
        raise PlacementInfeasibleError("fractional covering is impossible "
                                       "within the capacities") from exc
    return res.value


def brute_force_mhp(demand: np.ndarray, sizes: np.ndarray,
                    capacities: np.ndarray) -> PlacementResult:
    """Exhaustive optimum over all cache indicator matrices (tiny instances)."""
    m, n = demand.shape
    bits = m * n
    if bits > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{bits} binary variables exceeds the exhaustive "
                         f"limit {BRUTE_FORCE_LIMIT}")
    count = 1 << bits
    shifts = np.arange(bits, dtype=np.int64)
    profit_flat = (demand * sizes[None, :]).ravel()
    best_value = -np.inf
    best_pattern = -1
    chunk = 1 << 16
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
        y = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        y3 = y.reshape(len(idx), m, n)
        ok_cap = ((y3 @ sizes) <= capacities[None, :] + 1e-9).all(axis=1)
        ok_cover = y3.any(axis=1).all(axis=1)
        feasible = ok_cap & ok_cover
        if not feasible.any():
            continue
        values = y.astype(float) @ profit_flat
        values[~feasible] = -np.inf
        local = int(np.argmax(values))
        if values[local] > best_value:
            best_value = float(values[local])
            best_pattern = int(idx[local])
    if best_pattern < 0:
        return PlacementResult(Placement([set() for _ in range(m)]), 0.0,
                               None, feasible=False)
    y = ((best_pattern >> shifts) & 1).astype(bool).reshape(m, n)
    placement = Placement([set(np.flatnonzero(y[i])) for i in range(m)])
    return PlacementResult(placement, best_value, None, feasible=True)
