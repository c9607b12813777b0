"""Scenario files: a small sectioned key-value format with storage and rate
units, plus deterministic construction of the full Scenario from a spec.

Units are decimal (SI): 1 MB = 1e6 bytes, 1 TB = 1e12 bytes, 1 Mbps = 1e6
bits/second. Canonical serialization writes base units (bytes, bps,
seconds) so a parse -> serialize -> parse round trip is exact.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .engine import split_long_videos
from .model import (
    PlacementConfig,
    Scenario,
    SelectionConfig,
    SimDefaults,
    Video,
    build_custom_topology,
    build_topology,
    validate_scenario,
    with_node_capacities,
)
from .workload import generate_demand, replicate_demand_for_pieces


class ScenarioParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_BYTE_UNITS = {"B": 1.0, "KB": 1e3, "MB": 1e6, "GB": 1e9, "TB": 1e12}
_RATE_UNITS = {"bps": 1.0, "Kbps": 1e3, "Mbps": 1e6, "Gbps": 1e9}
_QTY_RE = re.compile(r"^([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-z]*)$")


def parse_quantity(text: str) -> float:
    """Number with an optional storage/rate/time suffix, in base units."""
    match = _QTY_RE.match(text.strip())
    if not match:
        raise ValueError(f"not a quantity: {text!r}")
    value = float(match.group(1))
    unit = match.group(2)
    if not unit:
        return value
    if unit in _BYTE_UNITS:
        return value * _BYTE_UNITS[unit]
    if unit in _RATE_UNITS:
        return value * _RATE_UNITS[unit]
    if unit == "s":
        return value
    raise ValueError(f"unknown unit {unit!r}")


@dataclass
class CatalogSpec:
    count: int = 100
    size_min: float = 20e6
    size_max: float = 400e6
    rate: float = 128e3
    seed: int = 1


@dataclass
class TopologySpec:
    mode: str = "builtin"
    routers: int = 1
    nodes_per_router: int = 1
    core_capacity: float = 10e9
    edge_capacity: float = 1e9
    links: list[tuple[str, str, float]] = field(default_factory=list)
    routes: list[tuple[int, int, tuple[int, ...]]] = field(default_factory=list)


@dataclass
class NodesSpec:
    capacity_min: float = 1.2e12
    capacity_max: float = 2.4e12
    capacity_ratio: float | None = None
    seed: int = 2


@dataclass
class DemandSpec:
    zipf_min: float = 0.7
    zipf_max: float = 0.9
    population_min: int = 20
    population_max: int = 30
    seed: int = 3


@dataclass
class ScenarioSpec:
    catalog: CatalogSpec = field(default_factory=CatalogSpec)
    topology: TopologySpec = field(default_factory=TopologySpec)
    nodes: NodesSpec = field(default_factory=NodesSpec)
    demand: DemandSpec = field(default_factory=DemandSpec)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    simulation: SimDefaults = field(default_factory=SimDefaults)


_SECTION_FIELDS = {
    "catalog": ("count", "size_min", "size_max", "rate", "seed"),
    "topology": ("mode", "routers", "nodes_per_router", "core_capacity",
                 "edge_capacity", "link", "route"),
    "nodes": ("capacity_min", "capacity_max", "capacity_ratio", "seed"),
    "demand": ("zipf_min", "zipf_max", "population_min", "population_max",
               "seed"),
    "placement": ("strategy", "precision", "ocmhp_rule"),
    "selection": ("strategy", "delta", "gamma", "round_slots", "report_slots",
                  "reschedule_slots"),
    "simulation": ("slots", "slot_duration", "intensity", "seed",
                   "background", "split_long", "all_requests"),
}

_INT_KEYS = {"count", "seed", "routers", "nodes_per_router", "population_min",
             "population_max", "round_slots", "report_slots",
             "reschedule_slots", "slots"}
_STR_KEYS = {"mode", "strategy", "ocmhp_rule", "background"}
_BOOL_KEYS = {"split_long", "all_requests"}


def parse_scenario_spec(text: str) -> ScenarioSpec:
    spec = ScenarioSpec()
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_FIELDS:
                raise ScenarioParseError(line_no, f"unknown section [{section}]")
            continue
        if section is None:
            raise ScenarioParseError(line_no, "key outside of any section")
        if "=" not in line:
            raise ScenarioParseError(line_no, f"expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SECTION_FIELDS[section]:
            raise ScenarioParseError(line_no,
                                     f"unknown key {key!r} in [{section}]")
        try:
            _assign(spec, section, key, value)
        except ValueError as exc:
            raise ScenarioParseError(line_no, str(exc)) from None
    _check_required(spec)
    return spec


def _assign(spec: ScenarioSpec, section: str, key: str, value: str) -> None:
    target_map = {
        "catalog": spec.catalog, "topology": spec.topology,
        "nodes": spec.nodes, "demand": spec.demand,
        "placement": spec.placement, "selection": spec.selection,
        "simulation": spec.simulation,
    }
    target = target_map[section]
    if section == "topology" and key == "link":
        parts = value.split()
        if len(parts) != 3:
            raise ValueError(f"link wants 'end_a end_b capacity', got {value!r}")
        spec.topology.links.append((parts[0], parts[1],
                                    parse_quantity(parts[2])))
        return
    if section == "topology" and key == "route":
        head, _, tail = value.partition(":")
        src_dst = head.split()
        if len(src_dst) != 2 or not tail.strip():
            raise ValueError(f"route wants 'src dst : link ids', got {value!r}")
        spec.topology.routes.append((int(src_dst[0]), int(src_dst[1]),
                                     tuple(int(x) for x in tail.split())))
        return

    attr = _SCHEMA_RENAMES.get((section, key), key)
    if key in _STR_KEYS:
        setattr(target, attr, value)
    elif key in _BOOL_KEYS:
        if value.lower() not in ("true", "false"):
            raise ValueError(f"{key} wants true/false, got {value!r}")
        setattr(target, attr, value.lower() == "true")
    elif key in _INT_KEYS:
        number = parse_quantity(value)
        if number != int(number):
            raise ValueError(f"{key} wants an integer, got {value!r}")
        setattr(target, attr, int(number))
    elif key == "capacity_ratio" and value.lower() == "none":
        target.capacity_ratio = None
    else:
        setattr(target, attr, parse_quantity(value))


_SCHEMA_RENAMES = {
    ("selection", "round_slots"): "round_len_slots",
    ("selection", "report_slots"): "report_period_slots",
    ("selection", "reschedule_slots"): "reschedule_period_slots",
    ("simulation", "slots"): "total_slots",
    ("simulation", "slot_duration"): "slot_duration_s",
}


def _check_required(spec: ScenarioSpec) -> None:
    if spec.catalog.count < 1:
        raise ValueError("catalog.count must be >= 1")
    if spec.catalog.size_min <= 0 or spec.catalog.size_max < spec.catalog.size_min:
        raise ValueError("catalog sizes must satisfy 0 < size_min <= size_max")
    if spec.topology.mode not in ("builtin", "custom"):
        raise ValueError(f"topology.mode {spec.topology.mode!r} unknown")
    if spec.topology.mode == "custom" and not spec.topology.links:
        raise ValueError("custom topology needs at least one link entry")
    if spec.nodes.capacity_min <= 0:
        raise ValueError("missing or non-positive nodes.capacity_min")


def serialize_scenario_spec(spec: ScenarioSpec) -> str:
    """Canonical text form (base units, fixed key order)."""
    def fmt(x: Any) -> str:
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, float):
            return f"{x:.12g}"
        return str(x)

    out = []
    out.append("[catalog]")
    c = spec.catalog
    out += [f"count = {c.count}", f"size_min = {fmt(c.size_min)}",
            f"size_max = {fmt(c.size_max)}", f"rate = {fmt(c.rate)}",
            f"seed = {c.seed}"]
    t = spec.topology
    out.append("[topology]")
    out.append(f"mode = {t.mode}")
    if t.mode == "builtin":
        out += [f"routers = {t.routers}",
                f"nodes_per_router = {t.nodes_per_router}",
                f"core_capacity = {fmt(t.core_capacity)}",
                f"edge_capacity = {fmt(t.edge_capacity)}"]
    else:
        for a, b, cap in t.links:
            out.append(f"link = {a} {b} {fmt(cap)}")
        for src, dst, links in t.routes:
            out.append(f"route = {src} {dst} : " + " ".join(map(str, links)))
    n = spec.nodes
    out.append("[nodes]")
    out += [f"capacity_min = {fmt(n.capacity_min)}",
            f"capacity_max = {fmt(n.capacity_max)}",
            f"capacity_ratio = {'none' if n.capacity_ratio is None else fmt(n.capacity_ratio)}",
            f"seed = {n.seed}"]
    d = spec.demand
    out.append("[demand]")
    out += [f"zipf_min = {fmt(d.zipf_min)}", f"zipf_max = {fmt(d.zipf_max)}",
            f"population_min = {d.population_min}",
            f"population_max = {d.population_max}", f"seed = {d.seed}"]
    p = spec.placement
    out.append("[placement]")
    out += [f"strategy = {p.strategy}", f"precision = {fmt(p.precision)}",
            f"ocmhp_rule = {p.ocmhp_rule}"]
    s = spec.selection
    out.append("[selection]")
    out += [f"strategy = {s.strategy}", f"delta = {fmt(s.delta)}",
            f"gamma = {fmt(s.gamma)}", f"round_slots = {s.round_len_slots}",
            f"report_slots = {s.report_period_slots}",
            f"reschedule_slots = {s.reschedule_period_slots}"]
    m = spec.simulation
    out.append("[simulation]")
    out += [f"slots = {m.total_slots}",
            f"slot_duration = {fmt(m.slot_duration_s)}",
            f"intensity = {fmt(m.intensity)}", f"seed = {m.seed}",
            f"background = {m.background}",
            f"split_long = {fmt(m.split_long)}",
            f"all_requests = {fmt(m.all_requests)}"]
    return "\n".join(out) + "\n"


def scenario_hash(spec: ScenarioSpec) -> str:
    return hashlib.sha256(serialize_scenario_spec(spec).encode()).hexdigest()[:16]


def build_scenario(spec: ScenarioSpec) -> Scenario:
    """Deterministically materialize catalog, topology, demand, background."""
    c = spec.catalog
    rng = np.random.default_rng(c.seed)
    sizes = rng.integers(int(c.size_min), int(c.size_max) + 1,
                         size=c.count).astype(float)
    catalog = [Video(k, float(sizes[k]), c.rate) for k in range(c.count)]

    if spec.topology.mode == "builtin":
        t = spec.topology
        topo = build_topology(t.routers, t.nodes_per_router,
                              t.core_capacity, t.edge_capacity)
    else:
        labels = {e for a, b, _ in spec.topology.links for e in (a, b)}
        node_ids = sorted(int(x[1:]) for x in labels if x.startswith("n"))
        if node_ids != list(range(len(node_ids))):
            raise ValueError("custom node labels must be n0..n<k> contiguous")
        routers_of = {}
        for a, b, _ in spec.topology.links:
            for x, y in ((a, b), (b, a)):
                if x.startswith("n") and y.startswith("r"):
                    routers_of.setdefault(int(x[1:]), int(y[1:]))
        node_routers = [routers_of.get(i, 0) for i in node_ids]
        routes = {(s, d): p for s, d, p in spec.topology.routes} or None
        topo = build_custom_topology(node_routers, [1.0] * len(node_ids),
                                     spec.topology.links, routes)

    node_count = len(topo.nodes)
    nrng = np.random.default_rng(spec.nodes.seed)
    caps = nrng.uniform(spec.nodes.capacity_min, spec.nodes.capacity_max,
                        size=node_count)
    if spec.nodes.capacity_ratio is not None:
        target_total = sizes.sum() / spec.nodes.capacity_ratio
        caps *= target_total / caps.sum()
    topo = with_node_capacities(topo, caps)

    d = spec.demand
    demand = generate_demand(catalog, node_count, (d.zipf_min, d.zipf_max),
                             (d.population_min, d.population_max), d.seed)

    if spec.simulation.split_long:
        catalog = split_long_videos(catalog,
                                    spec.selection.reschedule_period_slots,
                                    spec.simulation.slot_duration_s)
        demand = replicate_demand_for_pieces(demand, catalog)

    background = spec.simulation.background
    caps_l = topo.link_capacities()
    if background == "none":
        bg = np.zeros(len(topo.links))
    elif background == "quarter":
        bg = caps_l / 4.0
    else:
        bg = np.full(len(topo.links), parse_quantity(background))

    scenario = Scenario(catalog, topo, demand, bg,
                        placement_config=spec.placement,
                        selection_config=spec.selection,
                        sim=spec.simulation,
                        source_text=serialize_scenario_spec(spec))
    return scenario


def parse_scenario(text: str) -> Scenario:
    """Parse, build, and validate a scenario from its text form."""
    spec = parse_scenario_spec(text)
    scenario = build_scenario(spec)
    problems = validate_scenario(scenario)
    if problems:
        raise ValueError("scenario validation failed: "
                         + "; ".join(problems[:10]))
    return scenario
