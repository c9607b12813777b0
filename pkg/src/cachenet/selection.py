"""Per-round source selection over a load-dependent link cost model.

Includes the distributed greedy selector working on local flow views, the
three reference pickers (random, nearest, measured latency), the min-max
utilization LP, and the centralized barrier-method solver for the round
cost problem.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lp import LPError, solve_lp
from .model import Topology

DEFAULT_GAMMA = 0.99


class NoStrictlyFeasiblePointError(Exception):
    """Raised when even the min-max utilization optimum saturates a link."""

    def __init__(self, te_result: "TEResult"):
        super().__init__(f"min-max utilization is {te_result.pi_star:.4f} >= 1")
        self.te_result = te_result


def link_cost(load_bps: float, capacity_bps: float,
              gamma: float = DEFAULT_GAMMA) -> float:
    """Queueing delay per unit of data, linearized above the gamma knee.

    Below gamma * capacity this is 1 / (capacity - load); beyond it the
    tangent continuation keeps the function finite, continuous, convex and
    non-decreasing for every load >= 0, including overload.
    """
    if capacity_bps <= 0:
        raise ValueError("capacity must be positive")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie strictly between 0 and 1")
    knee = gamma * capacity_bps
    if load_bps < knee:
        return 1.0 / (capacity_bps - load_bps)
    slack = (1.0 - gamma) * capacity_bps
    return 1.0 / slack + (load_bps - knee) / (slack * slack)


def link_cost_array(loads: np.ndarray, capacities: np.ndarray,
                    gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    loads = np.asarray(loads, dtype=float)
    capacities = np.broadcast_to(np.asarray(capacities, dtype=float), loads.shape)
    knee = gamma * capacities
    slack = (1.0 - gamma) * capacities
    below = loads < knee
    out = np.empty_like(loads, dtype=float)
    out[below] = 1.0 / (capacities[below] - loads[below])
    out[~below] = 1.0 / slack[~below] \
        + (loads[~below] - knee[~below]) / (slack[~below] ** 2)
    return out


def _link_cost_derivative_array(loads, capacities, gamma):
    knee = gamma * capacities
    slack = (1.0 - gamma) * capacities
    below = loads < knee
    out = np.empty_like(loads, dtype=float)
    out[below] = 1.0 / (capacities[below] - loads[below]) ** 2
    out[~below] = 1.0 / slack[~below] ** 2
    return out


@dataclass
class FlowTable:
    """Per-link load decomposition: selection, background, and remaining."""

    capacity_bps: np.ndarray
    bg_bps: np.ndarray
    ss_bps: np.ndarray
    re_bps: np.ndarray

    @classmethod
    def build(cls, capacities: np.ndarray,
              background: np.ndarray | None = None) -> "FlowTable":
        caps = np.asarray(capacities, dtype=float)
        bg = np.zeros_like(caps) if background is None \
            else np.asarray(background, dtype=float).copy()
        return cls(caps, bg, np.zeros_like(caps), np.zeros_like(caps))

    def total(self) -> np.ndarray:
        return self.ss_bps + self.bg_bps + self.re_bps

    def utilization(self) -> np.ndarray:
        return self.total() / self.capacity_bps

    def copy(self) -> "FlowTable":
        return FlowTable(self.capacity_bps, self.bg_bps.copy(),
                         self.ss_bps.copy(), self.re_bps.copy())


def path_marginal_cost(flows: FlowTable, path: Sequence[int],
                       added_rate_bps: float,
                       gamma: float = DEFAULT_GAMMA) -> float:
    """Path cost once the given rate is tentatively added to every link."""
    if not path:
        return 0.0
    total = flows.total()
    return sum(link_cost(total[l] + added_rate_bps, flows.capacity_bps[l], gamma)
               for l in path)


def merge_requests(video_ids: Iterable[int]) -> tuple[dict[int, int], int]:
    """Collapse duplicate video requests of one node's round into one flow
    each; returns the multiplicity map and the number of duplicates removed."""
    counts = Counter(video_ids)
    merged = sum(counts.values()) - len(counts)
    return dict(sorted(counts.items())), merged


@dataclass
class RoundAssignment:
    """Source choices for one scheduling round.

    ``fractions[(node, video)]`` maps each chosen source to its share; the
    distributed selectors always assign a single source with share 1.
    """

    fractions: dict[tuple[int, int], dict[int, float]] = field(default_factory=dict)
    blocked: set[tuple[int, int]] = field(default_factory=set)

    def to_lines(self, round_index: int) -> list[str]:
        lines = []
        for (node, video), shares in sorted(self.fractions.items()):
            for source, fraction in sorted(shares.items()):
                lines.append(f"{round_index} {node} {video} {source} {fraction:.10g}")
        return lines


def linkshare_round(node: int, view: FlowTable, requests: Mapping[int, int],
                    holders: Sequence[tuple[int, ...]], topology: Topology,
                    rates: np.ndarray, delta: float,
                    gamma: float = DEFAULT_GAMMA) -> RoundAssignment:
    """Greedy source selection for one node against its local flow view.

    Requests are served in increasing order of source count (ties by video
    id). Every acceptance immediately adds the video rate to the local view
    so later requests in the same round see the tentative load. With
    delta > 0, any source whose path would be pushed past
    (1 - delta) * capacity on some link is unavailable; with delta = 0
    congestion avoidance is off and every source is eligible.
    """
    out = RoundAssignment()
    total = view.total()
    caps = view.capacity_bps
    order = sorted(requests, key=lambda k: (len(holders[k]), k))
    for video in order:
        rate = float(rates[video])
        best_cost = np.inf
        best_source = -1
        best_path: tuple[int, ...] = ()
        for source in holders[video]:
            path = topology.path(source, node)
            if delta > 0:
                limit = (1.0 - delta) * caps
                if any(total[l] + rate > limit[l] for l in path):
                    continue
            cost = sum(link_cost(total[l] + rate, caps[l], gamma) for l in path)
            if cost < best_cost:
                best_cost = cost
                best_source = source
                best_path = path
        if best_source < 0:
            out.blocked.add((node, video))
            continue
        out.fractions[(node, video)] = {best_source: 1.0}
        for l in best_path:
            view.ss_bps[l] += rate
            total[l] += rate
    return out


def reference_select(strategy: str, node: int, requests: Mapping[int, int],
                     holders: Sequence[tuple[int, ...]], topology: Topology,
                     rng: np.random.Generator | None = None,
                     latency: Callable[[int, int], float] | None = None,
                     ) -> RoundAssignment:
    """Random, nearest-source, or measured-latency source selection.

    The latency callable is expected to freeze each (source, node) pair at
    its first measurement within the round.
    """
    out = RoundAssignment()
    order = sorted(requests, key=lambda k: (len(holders[k]), k))
    for video in order:
        sources = holders[video]
        if strategy == "random":
            if rng is None:
                raise ValueError("random strategy needs an rng")
            source = sources[int(rng.integers(len(sources)))]
        elif strategy == "nearest":
            source = min(sources, key=lambda j: (len(topology.path(j, node)), j))
        elif strategy == "e2e":
            if latency is None:
                raise ValueError("e2e strategy needs a latency snapshot")
            source = min(sources, key=lambda j: (latency(j, node), j))
        else:
            raise ValueError(f"unknown reference strategy {strategy!r}")
        out.fractions[(node, video)] = {source: 1.0}
    return out


def te_greedy_round(node: int, view: FlowTable, requests: Mapping[int, int],
                    holders: Sequence[tuple[int, ...]], topology: Topology,
                    rates: np.ndarray) -> RoundAssignment:
    """Reference utilization-greedy selector: per request, take the source
    whose path keeps the peak link utilization lowest, ignoring cost.

    Works like the distributed greedy on a local view (tentative loads are
    added after each acceptance), but ranks sources by the maximum
    utilization any of their path links would reach, ties by source id.
    Chasing the least-utilized links regardless of path length is what
    makes this selector expensive under the load-dependent cost model.
    """
    out = RoundAssignment()
    total = view.total()
    caps = view.capacity_bps
    order = sorted(requests, key=lambda k: (len(holders[k]), k))
    for video in order:
        rate = float(rates[video])
        best_key = None
        best_source = -1
        best_path: tuple[int, ...] = ()
        for source in holders[video]:
            path = topology.path(source, node)
            peak = max(((total[l] + rate) / caps[l] for l in path),
                       default=0.0)
            key = (peak, source)
            if best_key is None or key < best_key:
                best_key = key
                best_source = source
                best_path = path
        out.fractions[(node, video)] = {best_source: 1.0}
        for l in best_path:
            view.ss_bps[l] += rate
            total[l] += rate
    return out


def make_latency_probe(flows: FlowTable, topology: Topology,
                       gamma: float = DEFAULT_GAMMA) -> Callable[[int, int], float]:
    """Round-scoped path latency measurements, at most one per node pair."""
    totals = flows.total()
    caps = flows.capacity_bps
    cache: dict[tuple[int, int], float] = {}

    def measure(source: int, dest: int) -> float:
        key = (source, dest)
        if key not in cache:
            cache[key] = sum(link_cost(totals[l], caps[l], gamma)
                             for l in topology.path(source, dest))
        return cache[key]

    return measure


@dataclass
class _VariableLayout:
    """Flat variable vector over (node, video, source) triples, with the
    rate-weighted link incidence used by both centralized solvers."""

    entries: list[tuple[int, int, int]]
    blocks: list[tuple[int, int, tuple[int, int]]]   # (start, end, (node, video))
    incidence: np.ndarray                            # (links, vars), rate-weighted

    @classmethod
    def build(cls, requests_by_node: Mapping[int, Mapping[int, int]],
              holders: Sequence[tuple[int, ...]], topology: Topology,
              rates: np.ndarray, link_count: int) -> "_VariableLayout":
        entries: list[tuple[int, int, int]] = []
        blocks: list[tuple[int, int, tuple[int, int]]] = []
        for node in sorted(requests_by_node):
            for video in sorted(requests_by_node[node]):
                start = len(entries)
                for source in holders[video]:
                    entries.append((node, video, source))
                blocks.append((start, len(entries), (node, video)))
        incidence = np.zeros((link_count, len(entries)))
        for col, (node, video, source) in enumerate(entries):
            for l in topology.path(source, node):
                incidence[l, col] = rates[video]
        return cls(entries, blocks, incidence)

    def assignment(self, x: np.ndarray, tol: float = 1e-12) -> RoundAssignment:
        out = RoundAssignment()
        for start, end, key in self.blocks:
            shares = {}
            for col in range(start, end):
                if x[col] > tol:
                    shares[self.entries[col][2]] = float(x[col])
            out.fractions[key] = shares
        return out


@dataclass
class TEResult:
    assignment: RoundAssignment
    pi_star: float
    x: np.ndarray
    layout: _VariableLayout | None

    @property
    def mrcp_feasible(self) -> bool:
        return self.pi_star < 1.0


def te_select(requests_by_node: Mapping[int, Mapping[int, int]],
              topology: Topology, holders: Sequence[tuple[int, ...]],
              flows: FlowTable, rates: np.ndarray) -> TEResult:
    """Fractional source selection minimizing the maximum link utilization."""
    fixed = flows.bg_bps + flows.re_bps
    caps = flows.capacity_bps
    link_count = len(caps)
    layout = _VariableLayout.build(requests_by_node, holders, topology,
                                   rates, link_count)
    nv = len(layout.entries)
    if nv == 0:
        pi = float((fixed / caps).max()) if link_count else 0.0
        return TEResult(RoundAssignment(), pi, np.zeros(0), layout)

    # single-source requests have no choice; presolve them into the fixed
    # load (cuts LP size and the degeneracy their forced columns create)
    free_cols = np.concatenate(
        [np.arange(s, e) for s, e, _ in layout.blocks if e - s > 1]
    ) if any(e - s > 1 for s, e, _ in layout.blocks) \
        else np.zeros(0, dtype=int)
    pinned_cols = np.setdiff1d(np.arange(nv), free_cols)
    fixed_lp = fixed + layout.incidence[:, pinned_cols].sum(axis=1)
    x = np.ones(nv)

    nf = len(free_cols)
    if nf == 0:
        pi = float((fixed_lp / caps).max())
        return TEResult(layout.assignment(x), pi, x, layout)

    c = np.zeros(nf + 1)
    c[-1] = 1.0
    # rows scaled by capacity: sum(r x)/C - pi <= -fixed/C, keeping the
    # tableau near unit magnitude regardless of the bps scale
    a_ub = np.hstack([layout.incidence[:, free_cols] / caps[:, None],
                      -np.ones((link_count, 1))])
    b_ub = -fixed_lp / caps
    free_blocks = [b for b in layout.blocks if b[1] - b[0] > 1]
    a_eq = np.zeros((len(free_blocks), nf + 1))
    col_of = {int(c_): i for i, c_ in enumerate(free_cols)}
    for row, (start, end, _) in enumerate(free_blocks):
        a_eq[row, [col_of[c_] for c_ in range(start, end)]] = 1.0
    b_eq = np.ones(len(free_blocks))
    upper = np.concatenate([np.ones(nf), [np.inf]])
    try:
        res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, upper=upper, rule="dantzig")
    except LPError:
        res = solve_lp(c, a_ub, b_ub, a_eq, b_eq, upper=upper, rule="bland",
                       max_iter=500_000)
    x[free_cols] = res.x[:nf]
    return TEResult(layout.assignment(x), float(res.value), x, layout)


def round_cost(flows: FlowTable, gamma: float = DEFAULT_GAMMA) -> float:
    """Aggregate selection-traffic cost over all links at current loads."""
    costs = link_cost_array(flows.total(), flows.capacity_bps, gamma)
    return float(np.dot(flows.ss_bps, costs))


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    if v.size == 1:
        return np.ones(1)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.max(np.flatnonzero(cond))) + 1
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _project_simplex_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection (all rows share one width)."""
    n = mat.shape[1]
    u = -np.sort(-mat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - np.argmax(cond[:, ::-1], axis=1) - 1
    theta = css[np.arange(mat.shape[0]), rho] / (rho + 1)
    return np.maximum(mat - theta[:, None], 0.0)


class _BlockProjector:
    """Simplex projection over many variable blocks, grouped by width."""

    def __init__(self, blocks: Sequence[tuple[int, int, tuple[int, int]]]):
        by_width: dict[int, list[int]] = {}
        for start, end, _ in blocks:
            by_width.setdefault(end - start, []).append(start)
        self.groups = []
        for width, starts in sorted(by_width.items()):
            rows = np.array([[s + o for o in range(width)] for s in starts])
            self.groups.append((width, rows))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = x.copy()
        for width, rows in self.groups:
            if width == 1:
                out[rows[:, 0]] = 1.0
            else:
                out[rows.ravel()] = _project_simplex_rows(x[rows]).ravel()
        return out


def centralized_mrcp(requests_by_node: Mapping[int, Mapping[int, int]],
                     topology: Topology, holders: Sequence[tuple[int, ...]],
                     flows: FlowTable, rates: np.ndarray,
                     epsilon: float | None = None,
                     gamma: float = DEFAULT_GAMMA,
                     m0: float = 1.0, mu: float = 10.0,
                     inner_tol: float = 1e-8, max_inner: int = 5000,
                     ) -> tuple[RoundAssignment, float]:
    """Barrier-method solve of the round cost problem.

    Minimizes the aggregate selection cost over the product of per-request
    simplices, keeping every link strictly under capacity via a log
    barrier; the barrier weight grows by ``mu`` until links/m drops to
    ``epsilon``, which bounds the suboptimality. The starting point comes
    from the min-max utilization LP; if that cannot place all flows
    strictly under capacity, NoStrictlyFeasiblePointError carries the LP
    solution for the caller to fall back on. Returns the assignment and
    its objective value.
    """
    te = te_select(requests_by_node, topology, holders, flows, rates)
    if not te.layout.entries:
        return te.assignment, 0.0
    if te.pi_star >= 1.0:
        raise NoStrictlyFeasiblePointError(te)

    layout = te.layout
    caps = flows.capacity_bps
    fixed = flows.bg_bps + flows.re_bps
    link_total = int(caps.size)
    if epsilon is None:
        epsilon = 0.01 * link_total

    # single-source requests are pinned at 1; their load joins the fixed part
    free_blocks = [b for b in layout.blocks if b[1] - b[0] > 1]
    pinned = [b[0] for b in layout.blocks if b[1] - b[0] == 1]
    fixed = fixed + layout.incidence[:, pinned].sum(axis=1) if pinned else fixed
    pinned_ss = layout.incidence[:, pinned].sum(axis=1) if pinned else 0.0
    if not free_blocks:
        x_full = np.ones(len(layout.entries))
        flows_like = layout.incidence @ x_full + flows.bg_bps + flows.re_bps
        zeta = link_cost_array(flows_like, caps, gamma)
        return layout.assignment(x_full), float((layout.incidence @ x_full) @ zeta)

    free_cols = np.concatenate([np.arange(s, e) for s, e, _ in free_blocks])
    col_map = {int(c): idx for idx, c in enumerate(free_cols)}
    blocks = []
    offset = 0
    for s, e, key in free_blocks:
        blocks.append((offset, offset + (e - s), key))
        offset += e - s
    incidence = layout.incidence[:, free_cols]
    active = incidence.any(axis=1)
    inc = incidence[active]
    caps_a = caps[active]
    fixed_a = fixed[active]
    pinned_a = pinned_ss[active] if pinned else np.zeros_like(caps_a)
    project = _BlockProjector(blocks)

    def objective(x):
        ss = inc @ x + pinned_a            # selection traffic on active links
        load = ss + (fixed_a - pinned_a)
        if np.any(load >= caps_a):
            return np.inf, np.inf
        zeta = link_cost_array(load, caps_a, gamma)
        g = float(ss @ zeta)
        phi = -float(np.log(caps_a - load).sum())
        return g, phi

    def gradient(x, m):
        ss = inc @ x + pinned_a
        load = ss + (fixed_a - pinned_a)
        zeta = link_cost_array(load, caps_a, gamma)
        dzeta = _link_cost_derivative_array(load, caps_a, gamma)
        return inc.T @ (m * (zeta + ss * dzeta) + 1.0 / (caps_a - load))

    x = project(te.x[free_cols].copy())
    g_val, phi_val = objective(x)
    if not np.isfinite(g_val + phi_val):
        # nudge strictly inside from the LP vertex toward the uniform point
        uniform = np.concatenate([np.full(e - s, 1.0 / (e - s))
                                  for s, e, _ in blocks])
        for keep in (0.9, 0.5, 0.1):
            x = keep * te.x[free_cols] + (1 - keep) * uniform
            g_val, phi_val = objective(x)
            if np.isfinite(g_val + phi_val):
                break
        else:
            raise NoStrictlyFeasiblePointError(te)

    m = float(m0)
    sigma = 1e-4
    beta = 0.5
    while True:
        step = 1.0
        value = m * g_val + phi_val
        stall = 0
        for _ in range(max_inner):
            grad = gradient(x, m)
            moved = False
            while step > 1e-18:
                cand = project(x - step * grad)
                g_c, phi_c = objective(cand)
                cand_value = m * g_c + phi_c
                if np.isfinite(cand_value) and \
                        cand_value <= value + sigma * float(grad @ (cand - x)):
                    moved = True
                    break
                step *= beta
            if not moved:
                break
            shift = np.linalg.norm(cand - x) / step
            improved = value - cand_value
            x, value, g_val, phi_val = cand, cand_value, g_c, phi_c
            step = min(step * 2.0, 1e14)
            if shift <= inner_tol:
                break
            stall = stall + 1 if improved <= 1e-12 * (1.0 + abs(value)) else 0
            if stall >= 5:
                break
        if link_total / m <= epsilon:
            break
        m *= mu

    x_full = np.ones(len(layout.entries))
    x_full[free_cols] = x
    ss_all = layout.incidence @ x_full
    load_all = ss_all + flows.bg_bps + flows.re_bps
    g_total = float(ss_all @ link_cost_array(load_all, caps, gamma))
    return layout.assignment(x_full), g_total
