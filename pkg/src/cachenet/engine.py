"""Discrete-slot simulation: arrivals, round scheduling, flow lifetimes,
periodic link-state reports, and piece-chained long videos."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .model import Scenario, Video, validate_scenario
from .placement import Placement
from .selection import (
    FlowTable,
    NoStrictlyFeasiblePointError,
    RoundAssignment,
    centralized_mrcp,
    link_cost_array,
    linkshare_round,
    make_latency_probe,
    merge_requests,
    reference_select,
    te_greedy_round,
    te_select,
)
from .workload import RequestStream, generate_requests

DISTRIBUTED_STRATEGIES = ("linkshare", "random", "nearest", "e2e")
CENTRAL_STRATEGIES = ("te", "centralized")


@dataclass
class SimConfig:
    total_slots: int
    intensity: float
    seed: int = 0
    slot_duration_s: float = 0.1
    round_len_slots: int = 1
    report_period_slots: int = 2
    reschedule_period_slots: int = 10
    strategy: str = "linkshare"
    delta: float = 0.0
    gamma: float = 0.99
    all_requests: bool = False    # sample hits too, not only collaborative

    def validate(self) -> None:
        if self.total_slots < 0:
            raise ValueError("total_slots must be >= 0")
        if min(self.round_len_slots, self.report_period_slots,
               self.reschedule_period_slots) < 1:
            raise ValueError("periods must be >= 1 slot")
        if self.strategy not in DISTRIBUTED_STRATEGIES:
            raise ValueError(f"dynamic strategy must be one of "
                             f"{DISTRIBUTED_STRATEGIES}, got {self.strategy!r}")


@dataclass
class SlotMetrics:
    slot: int
    max_utilization: float
    aggregate_cost: float
    throughput_bps: float
    blocked_count: int
    merged_count: int
    hit_count: int
    collaborative_count: int

    COLUMNS = ("slot", "max_utilization", "aggregate_cost", "throughput_bps",
               "blocked_count", "merged_count", "hit_count",
               "collaborative_count")

    def row(self) -> str:
        return (f"{self.slot},{self.max_utilization:.10g},"
                f"{self.aggregate_cost:.10g},{self.throughput_bps:.10g},"
                f"{self.blocked_count},{self.merged_count},{self.hit_count},"
                f"{self.collaborative_count}")


@dataclass
class MetricsSeries:
    rows: list[SlotMetrics] = field(default_factory=list)
    merged_by_video: dict[int, int] = field(default_factory=dict)
    hit_volume: float = 0.0
    collab_volume: float = 0.0
    merge_volume: float = 0.0
    assignment_lines: list[str] = field(default_factory=list)

    def to_csv(self, scenario_hash: str = "") -> str:
        lines = []
        if scenario_hash:
            lines.append(f"# scenario {scenario_hash}")
        lines.append(",".join(SlotMetrics.COLUMNS))
        lines.extend(r.row() for r in self.rows)
        return "\n".join(lines) + "\n"

    def mean(self, column: str) -> float:
        if not self.rows:
            return 0.0
        return float(np.mean([getattr(r, column) for r in self.rows]))

    def total(self, column: str) -> float:
        return float(np.sum([getattr(r, column) for r in self.rows]))


@dataclass
class _Flow:
    source: int
    dest: int
    video: int
    rate: float
    multiplicity: int
    birth_round: int
    path: tuple[int, ...]


def split_long_videos(catalog: Sequence[Video], piece_duration_slots: int,
                      slot_duration_s: float = 0.1) -> list[Video]:
    """Break videos longer than one piece into independently-handled pieces.

    Piece ids are renumbered sequentially so pieces of one video are
    adjacent; every piece carries its parent id, index, and the parent's
    piece count. Demand columns should be replicated accordingly (see
    workload.replicate_demand_for_pieces).
    """
    if piece_duration_slots < 1:
        raise ValueError("piece_duration_slots must be >= 1")
    piece_seconds = piece_duration_slots * slot_duration_s
    out: list[Video] = []
    for video in catalog:
        duration = video.duration_s()
        pieces = max(1, int(np.ceil(duration / piece_seconds - 1e-12)))
        if pieces == 1:
            out.append(replace(video, id=len(out), piece_count=1,
                               parent=video.id, piece_index=0))
            continue
        full_size = video.rate_bps * piece_seconds / 8.0
        remaining = video.size_bytes
        for index in range(pieces):
            size = full_size if index < pieces - 1 else remaining
            out.append(Video(len(out), size, video.rate_bps, pieces,
                             parent=video.id, piece_index=index))
            remaining -= size
    return out


def entry_videos(catalog: Sequence[Video]) -> list[int]:
    return [v.id for v in catalog if v.piece_index == 0]


class _Simulator:
    def __init__(self, scenario: Scenario, config: SimConfig,
                 placement: Placement, stream: RequestStream):
        self.scenario = scenario
        self.config = config
        self.placement = placement
        self.stream = stream
        self.topology = scenario.topology
        self.catalog = scenario.catalog
        self.rates = scenario.rates()
        self.caps = self.topology.link_capacities()
        self.holders = placement.holder_map(len(self.catalog))
        self.truth = FlowTable.build(self.caps, scenario.background_bps)
        self.node_count = len(self.topology.nodes)
        self.views = [self.truth.copy() for _ in range(self.node_count)] \
            if config.strategy == "linkshare" else []
        self.buckets: dict[int, list[_Flow]] = {}
        self.deferred: dict[int, list[tuple[int, int, int]]] = {}
        self.pending: dict[int, list[tuple[int, int]]] = {}
        self.rng = np.random.default_rng([config.seed, 0x5E1EC7])
        self.throughput = 0.0
        self.series = MetricsSeries()
        self.assignment_log: list[str] = []

    # -- per-slot pieces -------------------------------------------------

    def _expire(self, slot: int, current_round: int) -> None:
        for flow in self.buckets.pop(slot, []):
            comp = self.truth.ss_bps if flow.birth_round == current_round \
                else self.truth.re_bps
            for l in flow.path:
                comp[l] -= flow.rate
            self.throughput -= flow.rate
            self._chain_next(slot, flow.dest, flow.video, flow.multiplicity)

    def _chain_next(self, slot: int, node: int, video: int,
                    multiplicity: int) -> None:
        meta = self.catalog[video]
        if meta.piece_index + 1 < meta.piece_count:
            self.deferred.setdefault(slot, []).append(
                (node, video + 1, multiplicity))

    def _arrive(self, slot: int) -> tuple[int, int]:
        hits = 0
        collaborative = 0
        todo = [(n, v, 1) for (n, v) in self.stream_at(slot)]
        todo += self.deferred.pop(slot, [])
        for node, video, mult in todo:
            meta = self.catalog[video]
            if video in self.placement.cached[node]:
                hits += mult
                self.hit_volume += meta.size_bytes * mult
                # a locally played piece still advances the chain, one piece
                # duration later
                if meta.piece_index + 1 < meta.piece_count:
                    due = slot + self.config.reschedule_period_slots
                    self.deferred.setdefault(due, []).append(
                        (node, video + 1, mult))
            else:
                collaborative += mult
                self.collab_volume += meta.size_bytes * mult
                self.pending.setdefault(node, []).append((video, mult))
        return hits, collaborative

    def stream_at(self, slot: int):
        while self._cursor < len(self.stream.requests) \
                and self.stream.requests[self._cursor].slot == slot:
            r = self.stream.requests[self._cursor]
            self._cursor += 1
            yield r.node, r.video

    def _schedule_round(self, slot: int, current_round: int) -> tuple[int, int]:
        merged_total = 0
        blocked_total = 0
        cfg = self.config
        probe = make_latency_probe(self.truth, self.topology, cfg.gamma) \
            if cfg.strategy == "e2e" else None
        commits: list[tuple[RoundAssignment, dict[int, int]]] = []
        for node in range(self.node_count):
            entries = self.pending.pop(node, [])
            if not entries:
                continue
            raw = [v for v, mult in entries for _ in range(mult)]
            requests, dups = merge_requests(raw)
            merged_total += dups
            for video, count in requests.items():
                if count > 1:
                    self.series.merged_by_video[video] = \
                        self.series.merged_by_video.get(video, 0) + (count - 1)
                    self.merge_volume += \
                        self.catalog[video].size_bytes * (count - 1)
            if cfg.strategy == "linkshare":
                assignment = linkshare_round(node, self.views[node], requests,
                                             self.holders, self.topology,
                                             self.rates, cfg.delta, cfg.gamma)
            else:
                assignment = reference_select(cfg.strategy, node, requests,
                                              self.holders, self.topology,
                                              rng=self.rng, latency=probe)
            commits.append((assignment, requests))
        for assignment, requests in commits:
            blocked_total += sum(requests[k] for (_, k) in assignment.blocked)
            self._commit(assignment, requests, current_round, slot)
        return merged_total, blocked_total

    def _commit(self, assignment: RoundAssignment,
                requests: Mapping[int, int], current_round: int,
                slot: int) -> None:
        expiry = slot + self.config.reschedule_period_slots
        for (node, video), shares in sorted(assignment.fractions.items()):
            for source, fraction in sorted(shares.items()):
                rate = self.rates[video] * fraction
                path = self.topology.path(source, node)
                for l in path:
                    self.truth.ss_bps[l] += rate
                self.throughput += rate
                self.buckets.setdefault(expiry, []).append(
                    _Flow(source, node, video, rate, requests[video],
                          current_round, path))
            self.assignment_log.extend(
                RoundAssignment({(node, video): shares}).to_lines(current_round))

    def _report(self) -> None:
        for i in range(len(self.views)):
            self.views[i] = self.truth.copy()

    def _record(self, slot: int, merged: int, blocked: int, hits: int,
                collaborative: int) -> None:
        totals = self.truth.total()
        cost = float(self.truth.ss_bps
                     @ link_cost_array(totals, self.caps, self.config.gamma))
        self.series.rows.append(SlotMetrics(
            slot=slot,
            max_utilization=float((totals / self.caps).max()),
            aggregate_cost=cost,
            throughput_bps=self.throughput,
            blocked_count=blocked,
            merged_count=merged,
            hit_count=hits,
            collaborative_count=collaborative,
        ))

    # -- main loop -------------------------------------------------------

    _cursor = 0
    hit_volume = 0.0
    collab_volume = 0.0
    merge_volume = 0.0

    def run(self) -> MetricsSeries:
        cfg = self.config
        for slot in range(cfg.total_slots):
            current_round = slot // cfg.round_len_slots
            if slot % cfg.round_len_slots == 0:
                self.truth.re_bps += self.truth.ss_bps
                self.truth.ss_bps[:] = 0.0
            self._expire(slot, current_round)
            hits, collaborative = self._arrive(slot)
            merged = blocked = 0
            if slot % cfg.round_len_slots == 0:
                merged, blocked = self._schedule_round(slot, current_round)
            if self.views and slot % cfg.report_period_slots == 0:
                self._report()
            self._record(slot, merged, blocked, hits, collaborative)
        self.series.hit_volume = self.hit_volume
        self.series.collab_volume = self.collab_volume
        self.series.merge_volume = self.merge_volume
        self.series.assignment_lines = self.assignment_log
        return self.series

    def recomputed_totals(self) -> np.ndarray:
        """Ground-truth link totals rebuilt from scratch (for invariants)."""
        totals = self.truth.bg_bps.copy()
        for flows in self.buckets.values():
            for flow in flows:
                for l in flow.path:
                    totals[l] += flow.rate
        return totals


def run_simulation(scenario: Scenario, config: SimConfig,
                   placement: Placement,
                   stream: RequestStream | None = None) -> MetricsSeries:
    """Execute the discrete-slot loop; deterministic for fixed seeds.

    Requests arrive from the supplied stream (or one generated from the
    scenario demand), are merged per node at round boundaries, scheduled by
    the configured strategy, and committed as flows that expire after the
    reschedule period, chaining to the next piece where one exists.
    """
    config.validate()
    problems = validate_scenario(scenario)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems[:5]))
    if stream is None and config.total_slots > 0:
        stream = generate_requests(
            scenario.demand, config.total_slots, config.intensity,
            config.seed, config.slot_duration_s,
            placement=None if config.all_requests else placement,
            eligible_videos=entry_videos(scenario.catalog))
    elif stream is None:
        stream = RequestStream([], config.slot_duration_s)
    sim = _Simulator(scenario, config, placement, stream)
    return sim.run()


def static_scenario(scenario: Scenario, intensity: float, strategy: str,
                    placement: Placement, seed: int = 0,
                    delta: float = 0.0, gamma: float = 0.99,
                    epsilon: float | None = None) -> float:
    """Aggregate cost of one scheduling pass on quarter-full links."""
    cost, _, _ = run_static_round(scenario, intensity, strategy, placement,
                                  seed=seed, delta=delta, gamma=gamma,
                                  epsilon=epsilon)
    return cost


def run_static_round(scenario: Scenario, intensity: float, strategy: str,
                     placement: Placement, seed: int = 0,
                     delta: float = 0.0, gamma: float = 0.99,
                     epsilon: float | None = None,
                     ) -> tuple[float, RoundAssignment, FlowTable]:
    """One-slot scenario: quarter-full links, one batch of arrivals, one
    scheduling pass. Returns the aggregate cost, the assignment, and the
    resulting ground-truth flow table."""
    topo = scenario.topology
    caps = topo.link_capacities()
    truth = FlowTable.build(caps, caps / 4.0)
    rates = scenario.rates()
    holders = placement.holder_map(len(scenario.catalog))

    stream = generate_requests(scenario.demand, 1, intensity, seed,
                               placement=placement,
                               eligible_videos=entry_videos(scenario.catalog))
    per_node: dict[int, dict[int, int]] = {}
    for req in stream.requests:
        merged = per_node.setdefault(req.node, {})
        merged[req.video] = merged.get(req.video, 0) + 1

    if strategy in ("te-lp", "centralized"):
        if strategy == "te-lp":
            result = te_select(per_node, topo, holders, truth, rates)
            assignment = result.assignment
        else:
            try:
                assignment, _ = centralized_mrcp(per_node, topo, holders,
                                                 truth, rates,
                                                 epsilon=epsilon, gamma=gamma)
            except NoStrictlyFeasiblePointError as err:
                assignment = err.te_result.assignment
    elif strategy in DISTRIBUTED_STRATEGIES or strategy == "te":
        assignment = RoundAssignment()
        rng = np.random.default_rng([seed, 0xA11CE])
        probe = make_latency_probe(truth, topo, gamma)
        for node in sorted(per_node):
            requests = per_node[node]
            if strategy == "linkshare":
                part = linkshare_round(node, truth.copy(), requests, holders,
                                       topo, rates, delta, gamma)
            elif strategy == "te":
                part = te_greedy_round(node, truth.copy(), requests, holders,
                                       topo, rates)
            else:
                part = reference_select(strategy, node, requests, holders,
                                        topo, rng=rng, latency=probe)
            assignment.fractions.update(part.fractions)
            assignment.blocked |= part.blocked
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    for (node, video), shares in assignment.fractions.items():
        for source, fraction in shares.items():
            for l in topo.path(source, node):
                truth.ss_bps[l] += rates[video] * fraction
    costs = link_cost_array(truth.total(), caps, gamma)
    return float(truth.ss_bps @ costs), assignment, truth
