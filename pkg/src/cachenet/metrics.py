"""Control-overhead accounting and traffic-saving summaries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import Topology
from .placement import Placement
from .workload import RequestStream

REPORT_PACKET_BYTES = 32   # 4 B payload + 8 B UDP + 20 B IP


@dataclass
class OverheadModel:
    scheme: str                 # "linkshare_report" or "e2e_probe"
    packet_bytes: int = REPORT_PACKET_BYTES
    period_slots: int = 2
    slot_duration_s: float = 0.1

    def __post_init__(self) -> None:
        if self.packet_bytes <= 0:
            raise ValueError("packet_bytes must be > 0")


def linkshare_report_bytes_per_cycle(topology: Topology,
                                     packet_bytes: int = REPORT_PACKET_BYTES,
                                     hops_per_report: int | None = None) -> int:
    """Bytes moved per reporting cycle: every router's multicast tree covers
    the whole network, so each of the per-link reports travels once over
    every link (the hop count is overridable for other dissemination
    trees)."""
    links = len(topology.links)
    hops = links if hops_per_report is None else hops_per_report
    return links * hops * packet_bytes


def linkshare_overhead(topology: Topology,
                       packet_bytes: int = REPORT_PACKET_BYTES,
                       period_slots: int = 2,
                       slot_duration_s: float = 0.1,
                       hops_per_report: int | None = None) -> float:
    """Aggregate link-state reporting bandwidth over all links, bits/second."""
    per_cycle = linkshare_report_bytes_per_cycle(topology, packet_bytes,
                                                 hops_per_report)
    return per_cycle * 8.0 / (period_slots * slot_duration_s)


def e2e_probe_bytes_per_slot(node_count: int, avg_roundtrip_hops: float,
                             packet_bytes: int = REPORT_PACKET_BYTES) -> float:
    if node_count < 2:
        raise ValueError("probing needs at least two nodes")
    probes = node_count * (node_count - 1)
    return probes * avg_roundtrip_hops * packet_bytes


def e2e_overhead(node_count: int, avg_roundtrip_hops: float,
                 packet_bytes: int = REPORT_PACKET_BYTES,
                 slot_duration_s: float = 0.1) -> float:
    """Aggregate latency-probing bandwidth over all links, bits/second."""
    per_slot = e2e_probe_bytes_per_slot(node_count, avg_roundtrip_hops,
                                        packet_bytes)
    return per_slot * 8.0 / slot_duration_s


def savings_report(stream: RequestStream, placement: Placement,
                   sizes: Sequence[float],
                   merged_by_video: Mapping[int, int] | None = None,
                   ) -> tuple[float, float]:
    """(hit saving, merge saving) as traffic-volume fractions.

    Hit saving is the locally served share of total requested volume; merge
    saving is the duplicate volume removed by round merging relative to the
    collaborative volume. Both default to 0 when their denominator is empty.
    """
    sizes = np.asarray(sizes, dtype=float)
    total = 0.0
    hit = 0.0
    for req in stream.requests:
        vol = float(sizes[req.video])
        total += vol
        if req.video in placement.cached[req.node]:
            hit += vol
    hit_saving = hit / total if total > 0 else 0.0
    collaborative = total - hit
    merged = 0.0
    if merged_by_video:
        merged = float(sum(sizes[k] * dups for k, dups in merged_by_video.items()))
    merge_saving = merged / collaborative if collaborative > 0 else 0.0
    return hit_saving, merge_saving
