from __future__ import annotations

import numpy as np
import pytest

from cachenet.engine import (
    SimConfig,
    SlotMetrics,
    _Simulator,
    entry_videos,
    run_simulation,
    run_static_round,
    split_long_videos,
    static_scenario,
)
from cachenet.model import Scenario, Video, build_topology
from cachenet.placement import Placement, srs
from cachenet.workload import (
    generate_demand,
    generate_requests,
    replicate_demand_for_pieces,
)


def _scenario(router_count=2, nodes_per_router=2, videos=6, seed=0,
              capacity_share=0.6, core=100e6, edge=20e6,
              size=160_000.0, rate=128e3, background=None):
    node_count = router_count * nodes_per_router
    sizes = np.full(videos, size)
    caps = np.full(node_count, sizes.sum() * capacity_share)
    topo = build_topology(router_count, nodes_per_router, core, edge,
                          node_capacities=caps)
    catalog = [Video(k, float(sizes[k]), rate) for k in range(videos)]
    demand = generate_demand(catalog, node_count, (0.7, 0.9), (20, 30),
                             seed + 100)
    bg = np.zeros(len(topo.links)) if background is None \
        else np.full(len(topo.links), background)
    return Scenario(catalog, topo, demand, bg)


def _place(scenario):
    return srs(scenario.demand, scenario.sizes(),
               scenario.topology.node_capacities(), precision=0.01).placement


def _stream(scenario, placement, slots, intensity, seed):
    return generate_requests(scenario.demand, slots, intensity, seed,
                             placement=placement,
                             eligible_videos=entry_videos(scenario.catalog))


# ------------------------------------------------------------- splitting

def test_split_short_video_unchanged():
    catalog = [Video(0, 16_000.0, 128e3)]   # exactly 1 s at 128 Kbps
    out = split_long_videos(catalog, 10, 0.1)
    assert len(out) == 1
    assert out[0].piece_count == 1
    assert out[0].parent == 0


def test_split_ten_second_video_into_ten_pieces():
    catalog = [Video(0, 160_000.0, 128e3)]  # 10 s at 128 Kbps
    out = split_long_videos(catalog, 10, 0.1)
    assert len(out) == 10
    assert all(v.piece_count == 10 for v in out)
    assert [v.piece_index for v in out] == list(range(10))
    assert sum(v.size_bytes for v in out) == pytest.approx(160_000.0)
    assert all(v.parent == 0 for v in out)


def test_split_renumbers_sequentially_and_replicates_demand():
    catalog = [Video(0, 16_000.0, 128e3), Video(1, 48_000.0, 128e3)]
    out = split_long_videos(catalog, 10, 0.1)
    assert [v.id for v in out] == list(range(4))
    assert entry_videos(out) == [0, 1]
    demand = np.array([[2.0, 6.0]])
    spread = replicate_demand_for_pieces(demand, out)
    assert np.array_equal(spread, [[2.0, 6.0, 6.0, 6.0]])


# ------------------------------------------------------------ simulation

def test_zero_slots_empty_series():
    s = _scenario()
    series = run_simulation(s, SimConfig(0, 1.0), _place(s))
    assert series.rows == []


def test_zero_like_intensity_keeps_background_utilization():
    s = _scenario(background=5e6)
    placement = _place(s)
    cfg = SimConfig(total_slots=20, intensity=1e-6, seed=1)
    series = run_simulation(s, cfg, placement)
    caps = s.topology.link_capacities()
    expected = float((s.background_bps / caps).max())
    for row in series.rows:
        assert row.max_utilization == pytest.approx(expected)
        assert row.aggregate_cost == 0.0


def test_simulation_emits_one_row_per_slot():
    s = _scenario()
    cfg = SimConfig(total_slots=100, intensity=16.0, seed=2,
                    reschedule_period_slots=10, report_period_slots=2)
    series = run_simulation(s, cfg, _place(s))
    assert len(series.rows) == 100
    assert [r.slot for r in series.rows] == list(range(100))


def test_simulation_deterministic_byte_for_byte():
    s = _scenario()
    cfg = SimConfig(total_slots=50, intensity=12.0, seed=3, strategy="random")
    a = run_simulation(s, cfg, _place(s)).to_csv("h")
    b = run_simulation(s, cfg, _place(s)).to_csv("h")
    assert a == b


def test_flow_conservation_against_scratch_rebuild():
    s = _scenario()
    placement = _place(s)
    cfg = SimConfig(total_slots=30, intensity=10.0, seed=4,
                    reschedule_period_slots=5)
    sim = _Simulator(s, cfg, placement, _stream(s, placement, 30, 10.0, 4))
    sim.run()
    assert np.allclose(sim.truth.total(), sim.recomputed_totals(), atol=1e-9)
    # nothing outlives its expiry slot
    assert all(slot >= 30 for slot in sim.buckets)


def test_views_match_truth_right_after_report():
    s = _scenario()
    placement = _place(s)
    cfg = SimConfig(total_slots=8, intensity=10.0, seed=5,
                    report_period_slots=2, strategy="linkshare")
    sim = _Simulator(s, cfg, placement, _stream(s, placement, 8, 10.0, 5))
    # replay the loop manually to inspect state right after each report
    for slot in range(cfg.total_slots):
        current_round = slot
        sim.truth.re_bps += sim.truth.ss_bps
        sim.truth.ss_bps[:] = 0.0
        sim._expire(slot, current_round)
        sim._arrive(slot)
        sim._schedule_round(slot, current_round)
        if slot % cfg.report_period_slots == 0:
            sim._report()
            for view in sim.views:
                assert np.array_equal(view.total(), sim.truth.total())


def test_flows_expire_after_reschedule_period():
    s = _scenario()
    placement = _place(s)
    cfg = SimConfig(total_slots=12, intensity=8.0, seed=6,
                    reschedule_period_slots=3)
    series = run_simulation(s, cfg, placement,
                            stream=_stream(s, placement, 1, 8.0, 6))
    tp = [r.throughput_bps for r in series.rows]
    assert tp[0] > 0
    assert tp[4] == pytest.approx(0.0)   # single-piece flows are gone


def test_piece_chains_keep_flows_alive():
    s = _scenario(videos=4, size=48_000.0)   # 3 s videos -> 3 pieces of 1 s
    split = split_long_videos(s.catalog, 10, 0.1)
    demand = replicate_demand_for_pieces(s.demand, split)
    s2 = Scenario(split, s.topology, demand, s.background_bps)
    placement = Placement([set() for _ in s2.topology.nodes])
    placement.cached[0].update(v.id for v in split)   # node 0 holds all
    cfg = SimConfig(total_slots=35, intensity=4.0, seed=7,
                    reschedule_period_slots=10)
    stream = generate_requests(demand, 1, 60.0, 7, placement=placement,
                               eligible_videos=entry_videos(split))
    series = run_simulation(s2, cfg, placement, stream=stream)
    tp = [r.throughput_bps for r in series.rows]
    assert tp[0] > 0
    assert tp[15] > 0            # second piece in flight
    assert tp[25] > 0            # third piece in flight
    assert tp[32] == pytest.approx(0.0)   # chain ended


def test_static_round_no_arrivals_costs_nothing():
    s = _scenario()
    placement = _place(s)
    cost, assignment, truth = run_static_round(s, 1e-9, "nearest", placement,
                                               seed=8)
    assert cost == 0.0
    assert assignment.fractions == {}
    caps = s.topology.link_capacities()
    assert np.allclose(truth.total(), caps / 4)


def test_static_round_cost_matches_hand_recomputation():
    s = _scenario(videos=2)
    placement = Placement([set(), {0, 1}, set(), set()])
    cost, assignment, truth = run_static_round(s, 3.0, "nearest", placement,
                                               seed=12)
    caps = s.topology.link_capacities()
    ss = np.zeros(len(caps))
    for (node, video), shares in assignment.fractions.items():
        for source, fraction in shares.items():
            for l in s.topology.path(source, node):
                ss[l] += s.catalog[video].rate_bps * fraction
    expected = sum(ss[l] / (caps[l] - (caps[l] / 4 + ss[l]))
                   for l in range(len(caps)) if ss[l] > 0)
    assert cost == pytest.approx(expected, rel=1e-9)


def test_static_scenario_returns_the_round_cost():
    s = _scenario(videos=4)
    placement = _place(s)
    cost = static_scenario(s, 6.0, "nearest", placement, seed=14)
    detailed, _, _ = run_static_round(s, 6.0, "nearest", placement, seed=14)
    assert cost == detailed


def test_static_e2e_equals_nearest_on_quarter_full_links():
    s = _scenario(router_count=3, nodes_per_router=3, videos=12,
                  size=100_000.0)
    placement = _place(s)
    for seed in range(5):
        a, *_ = run_static_round(s, 30.0, "e2e", placement, seed=seed)
        b, *_ = run_static_round(s, 30.0, "nearest", placement, seed=seed)
        assert a == b


def test_static_strategies_cover_centralized_and_te():
    s = _scenario(videos=8)
    placement = _place(s)
    for strategy in ("te", "centralized", "linkshare", "random"):
        cost, assignment, _ = run_static_round(s, 10.0, strategy, placement,
                                               seed=13, epsilon=0.1)
        for shares in assignment.fractions.values():
            assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)
        assert cost >= 0.0


def test_metrics_series_csv_shape():
    s = _scenario()
    cfg = SimConfig(total_slots=5, intensity=6.0, seed=9)
    series = run_simulation(s, cfg, _place(s))
    text = series.to_csv("abc123")
    lines = text.strip().split("\n")
    assert lines[0] == "# scenario abc123"
    assert lines[1].split(",") == list(SlotMetrics.COLUMNS)
    assert len(lines) == 2 + 5


def test_invalid_config_and_scenario_rejected():
    s = _scenario()
    placement = _place(s)
    with pytest.raises(ValueError):
        run_simulation(s, SimConfig(5, 1.0, strategy="te"), placement)
    bad = _scenario()
    bad.background_bps[0] = 1e18
    with pytest.raises(ValueError):
        run_simulation(bad, SimConfig(5, 1.0), placement)
