"""Synthetic demand matrices and per-slot request streams."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .model import Video
    from .placement import Placement


@dataclass(frozen=True)
class Request:
    slot: int
    node: int
    video: int


@dataclass
class RequestStream:
    requests: list[Request]
    slot_duration_s: float

    def __len__(self) -> int:
        return len(self.requests)

    def to_text(self) -> str:
        lines = [f"{r.slot} {r.node} {r.video}" for r in self.requests]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, slot_duration_s: float) -> "RequestStream":
        requests = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            slot, node, video = (int(x) for x in line.split())
            requests.append(Request(slot, node, video))
        return cls(requests, slot_duration_s)


def zipf_weights(count: int, exponent: float) -> np.ndarray:
    """Zipf factors for ranks 1..count, normalized to sum to one."""
    ranks = np.arange(1, count + 1, dtype=float)
    w = ranks ** (-exponent)
    return w / w.sum()


def generate_demand(catalog: Sequence["Video"], node_count: int,
                    zipf_exponent_range: tuple[float, float],
                    population_range: tuple[int, int],
                    seed: int) -> np.ndarray:
    """Per-node request frequencies: population-scaled Zipf over permuted ranks.

    For each node the draws are, in order: an integer population from
    ``population_range`` (inclusive), an exponent from
    ``zipf_exponent_range``, and an independent rank permutation of the
    catalog. Row sums equal the node's population parameter.
    """
    if not catalog:
        raise ValueError("catalog is empty")
    if node_count < 1:
        raise ValueError("need at least one node")
    z_lo, z_hi = zipf_exponent_range
    p_lo, p_hi = population_range
    if not (0 < z_lo <= z_hi) or not (0 < p_lo <= p_hi):
        raise ValueError("ranges must satisfy 0 < lo <= hi")

    n = len(catalog)
    rng = np.random.default_rng(seed)
    demand = np.empty((node_count, n), dtype=float)
    for i in range(node_count):
        population = int(rng.integers(p_lo, p_hi, endpoint=True))
        exponent = float(rng.uniform(z_lo, z_hi))
        ranks = rng.permutation(n)          # ranks[k] = 0-based rank of video k
        weights = zipf_weights(n, exponent)
        demand[i] = population * weights[ranks]
    return demand


def replicate_demand_for_pieces(demand: np.ndarray,
                                catalog: Sequence["Video"]) -> np.ndarray:
    """Demand over a split catalog: each piece inherits its parent's column."""
    cols = [v.parent if v.parent is not None else v.id for v in catalog]
    return demand[:, cols].copy()


def generate_requests(demand: np.ndarray, slot_count: int, intensity: float,
                      seed: int, slot_duration_s: float = 0.1,
                      placement: "Placement | None" = None,
                      eligible_videos: Sequence[int] | None = None) -> RequestStream:
    """Poisson arrivals per slot, (node, video) drawn proportionally to demand.

    When a placement is given, locally cached pairs are excluded so the
    configured intensity counts collaborative requests only. An optional
    video subset restricts draws further (e.g. to the first piece of split
    videos).
    """
    if slot_count < 1:
        raise ValueError("slot_count must be >= 1")
    if intensity <= 0:
        raise ValueError("intensity must be > 0")
    node_count, video_count = demand.shape

    weights = np.array(demand, dtype=float, copy=True)
    if eligible_videos is not None:
        mask = np.zeros(video_count, dtype=bool)
        mask[list(eligible_videos)] = True
        weights[:, ~mask] = 0.0
    if placement is not None:
        for i in range(node_count):
            cached = sorted(placement.cached[i])
            if cached:
                weights[i, cached] = 0.0
    total = weights.sum()
    if total <= 0:
        raise ValueError("demand matrix has no eligible positive entries")
    probabilities = (weights / total).ravel()

    rng = np.random.default_rng(seed)
    requests: list[Request] = []
    for slot in range(slot_count):
        count = int(rng.poisson(intensity))
        if count == 0:
            continue
        flat = rng.choice(weights.size, size=count, p=probabilities)
        for f in flat:
            requests.append(Request(slot, int(f) // video_count, int(f) % video_count))
    return RequestStream(requests, slot_duration_s)
