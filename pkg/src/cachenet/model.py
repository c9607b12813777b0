"""Domain model: videos, serving nodes, links, and single-path topologies.

Internal units are bytes for storage and bits/second for rates. Element
labels are strings: ``r3`` is router 3, ``n17`` is serving node 17.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class Video:
    """One cacheable item. Split pieces carry their parent id and index."""

    id: int
    size_bytes: float
    rate_bps: float
    piece_count: int = 1
    parent: int | None = None
    piece_index: int = 0

    def __post_init__(self) -> None:
        if self.size_bytes <= 0:
            raise ValueError(f"video {self.id}: size_bytes must be > 0")
        if self.rate_bps <= 0:
            raise ValueError(f"video {self.id}: rate_bps must be > 0")
        if self.piece_count < 1:
            raise ValueError(f"video {self.id}: piece_count must be >= 1")

    def duration_s(self) -> float:
        return self.size_bytes * 8.0 / self.rate_bps


@dataclass(frozen=True)
class ServingNode:
    id: int
    capacity_bytes: float
    attached_router: int

    def __post_init__(self) -> None:
        if self.capacity_bytes <= 0:
            raise ValueError(f"node {self.id}: capacity_bytes must be > 0")

    @property
    def label(self) -> str:
        return f"n{self.id}"


@dataclass(frozen=True)
class Link:
    id: int
    capacity_bps: float
    endpoints: tuple[str, str]

    def __post_init__(self) -> None:
        if self.capacity_bps <= 0:
            raise ValueError(f"link {self.id}: capacity_bps must be > 0")


@dataclass
class Topology:
    """Static single-path topology: one fixed route per ordered node pair."""

    routers: list[int]
    nodes: list[ServingNode]
    links: list[Link]
    route_table: dict[tuple[int, int], tuple[int, ...]]

    def path(self, j: int, i: int) -> tuple[int, ...]:
        """Link ids traversed from node j to node i (empty when j == i)."""
        try:
            return self.route_table[(j, i)]
        except KeyError:
            raise ValueError(f"no route entry for node pair ({j}, {i})") from None

    def link_capacities(self) -> np.ndarray:
        return np.array([l.capacity_bps for l in self.links], dtype=float)

    def node_capacities(self) -> np.ndarray:
        return np.array([n.capacity_bytes for n in self.nodes], dtype=float)


def path_cost_hops(topology: Topology, j: int, i: int) -> int:
    """Hop count of the fixed route from node j to node i; 0 when j == i."""
    return len(topology.path(j, i))


def _adjacency(links: Sequence[Link]) -> dict[str, list[tuple[int, str]]]:
    adj: dict[str, list[tuple[int, str]]] = {}
    for link in links:
        a, b = link.endpoints
        adj.setdefault(a, []).append((link.id, b))
        adj.setdefault(b, []).append((link.id, a))
    for neighbors in adj.values():
        neighbors.sort()
    return adj


def _shortest_link_paths(adj: Mapping[str, list[tuple[int, str]]],
                         start: str) -> dict[str, tuple[int, ...]]:
    """Fewest-hops paths from start, ties broken by smallest link-id sequence."""
    best: dict[str, tuple[int, tuple[int, ...]]] = {start: (0, ())}
    heap: list[tuple[int, tuple[int, ...], str]] = [(0, (), start)]
    while heap:
        dist, path, label = heapq.heappop(heap)
        if (dist, path) != best.get(label, (None, None)):
            continue
        for link_id, other in adj.get(label, []):
            cand = (dist + 1, path + (link_id,))
            if other not in best or cand < best[other]:
                best[other] = cand
                heapq.heappush(heap, (cand[0], cand[1], other))
    return {label: path for label, (_, path) in best.items()}


def build_route_table(nodes: Sequence[ServingNode],
                      links: Sequence[Link]) -> dict[tuple[int, int], tuple[int, ...]]:
    adj = _adjacency(links)
    table: dict[tuple[int, int], tuple[int, ...]] = {}
    for src in nodes:
        paths = _shortest_link_paths(adj, src.label)
        for dst in nodes:
            if dst.label not in paths:
                raise ValueError(f"nodes {src.id} and {dst.id} are disconnected")
            table[(src.id, dst.id)] = paths[dst.label]
    return table


def build_topology(router_count: int, nodes_per_router: int,
                   core_capacity_bps: float, edge_capacity_bps: float,
                   node_capacities: Sequence[float] | float = 1.0) -> Topology:
    """Hub-and-spoke router backbone with serving nodes hanging off each router.

    Router 0 is the hub; every other router connects to it by one core link,
    and every serving node connects to its router by one edge link. For
    (8, 7) this yields 56 nodes and 63 links. Node capacities default to a
    placeholder of one byte-unit; pass real capacities or rebuild with
    :func:`with_node_capacities`.
    """
    if router_count < 1 or nodes_per_router < 1:
        raise ValueError("router_count and nodes_per_router must be >= 1")
    node_count = router_count * nodes_per_router
    if np.isscalar(node_capacities):
        caps = [float(node_capacities)] * node_count
    else:
        caps = [float(c) for c in node_capacities]
        if len(caps) != node_count:
            raise ValueError(f"expected {node_count} node capacities, got {len(caps)}")

    nodes = [ServingNode(i, caps[i], i // nodes_per_router) for i in range(node_count)]
    links: list[Link] = []
    for node in nodes:
        links.append(Link(len(links), edge_capacity_bps,
                          (node.label, f"r{node.attached_router}")))
    for router in range(1, router_count):
        links.append(Link(len(links), core_capacity_bps, (f"r{router}", "r0")))

    table = build_route_table(nodes, links)
    return Topology(list(range(router_count)), nodes, links, table)


def build_custom_topology(node_routers: Sequence[int],
                          node_capacities: Sequence[float],
                          link_specs: Sequence[tuple[str, str, float]],
                          routes: Mapping[tuple[int, int], Sequence[int]] | None = None,
                          ) -> Topology:
    """Topology from an explicit link listing, with routes derived or given.

    ``link_specs`` entries are (endpoint_a, endpoint_b, capacity_bps) using
    ``n<i>``/``r<j>`` labels. Routes not listed explicitly are computed by
    shortest hops with lowest-link-id tie-breaking.
    """
    if len(node_routers) != len(node_capacities):
        raise ValueError("node_routers and node_capacities must align")
    nodes = [ServingNode(i, node_capacities[i], node_routers[i])
             for i in range(len(node_routers))]
    links = [Link(idx, cap, (a, b)) for idx, (a, b, cap) in enumerate(link_specs)]
    routers = sorted({n.attached_router for n in nodes}
                     | {int(e[1:]) for l in links for e in l.endpoints if e.startswith("r")})
    table = build_route_table(nodes, links)
    if routes:
        for pair, link_ids in routes.items():
            table[pair] = tuple(int(x) for x in link_ids)
    return Topology(routers, nodes, links, table)


def with_node_capacities(topology: Topology, capacities: Sequence[float]) -> Topology:
    """Copy of the topology with node capacities replaced."""
    if len(capacities) != len(topology.nodes):
        raise ValueError("capacity list does not match node count")
    nodes = [ServingNode(n.id, float(c), n.attached_router)
             for n, c in zip(topology.nodes, capacities)]
    return Topology(list(topology.routers), nodes, list(topology.links),
                    dict(topology.route_table))


@dataclass
class PlacementConfig:
    strategy: str = "srs"
    precision: float = 0.005
    ocmhp_rule: str = "max_regret"


@dataclass
class SelectionConfig:
    strategy: str = "linkshare"
    delta: float = 0.0
    gamma: float = 0.99
    round_len_slots: int = 1
    report_period_slots: int = 2
    reschedule_period_slots: int = 10


@dataclass
class SimDefaults:
    total_slots: int = 100
    slot_duration_s: float = 0.1
    intensity: float = 160.0
    seed: int = 0
    background: str = "none"   # none | quarter | <bps value as str>
    split_long: bool = False
    all_requests: bool = False


@dataclass
class Scenario:
    """A full experiment description: catalog, topology, demand, knobs."""

    catalog: list[Video]
    topology: Topology
    demand: np.ndarray
    background_bps: np.ndarray
    placement_config: PlacementConfig = field(default_factory=PlacementConfig)
    selection_config: SelectionConfig = field(default_factory=SelectionConfig)
    sim: SimDefaults = field(default_factory=SimDefaults)
    source_text: str = ""

    def sizes(self) -> np.ndarray:
        return np.array([v.size_bytes for v in self.catalog], dtype=float)

    def rates(self) -> np.ndarray:
        return np.array([v.rate_bps for v in self.catalog], dtype=float)

    def capacity_ratio(self) -> float:
        return float(self.sizes().sum() / self.topology.node_capacities().sum())


def validate_scenario(scenario: Scenario) -> list[str]:
    """All invariant violations, as human-readable strings. Never raises."""
    out: list[str] = []
    topo = scenario.topology
    node_count, video_count = len(topo.nodes), len(scenario.catalog)

    for idx, video in enumerate(scenario.catalog):
        if video.id != idx:
            out.append(f"catalog index {idx} holds video id {video.id}")
    router_set = set(topo.routers)
    for node in topo.nodes:
        if node.attached_router not in router_set:
            out.append(f"node {node.id} attached to unknown router {node.attached_router}")
    link_ids = {l.id for l in topo.links}

    if scenario.demand.shape != (node_count, video_count):
        out.append(f"demand shape {scenario.demand.shape} != ({node_count}, {video_count})")
    else:
        bad = np.argwhere(scenario.demand < 0)
        for i, k in bad:
            out.append(f"negative demand at (node {i}, video {k})")

    for (j, i), path in topo.route_table.items():
        if j == i and path:
            out.append(f"self path ({j},{i}) is not empty")
        unknown = [l for l in path if l not in link_ids]
        if unknown:
            out.append(f"path ({j},{i}) references unknown links {unknown}")
        if len(set(path)) != len(path):
            out.append(f"path ({j},{i}) repeats a link (cycle)")
    for j in range(node_count):
        for i in range(node_count):
            if (j, i) not in topo.route_table:
                out.append(f"route table is missing node pair ({j},{i})")

    if len(scenario.background_bps) != len(topo.links):
        out.append(f"background vector has {len(scenario.background_bps)} entries "
                   f"for {len(topo.links)} links")
    else:
        for link in topo.links:
            if scenario.background_bps[link.id] > link.capacity_bps:
                out.append(f"background load exceeds capacity on link {link.id}")
    return out
