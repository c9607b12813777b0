from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cachenet.model import Video
from cachenet.placement import Placement
from cachenet.workload import (
    RequestStream,
    generate_demand,
    generate_requests,
    replicate_demand_for_pieces,
    zipf_weights,
)


def _catalog(n, size=1e6, rate=128e3):
    return [Video(k, size, rate) for k in range(n)]


@given(st.integers(min_value=1, max_value=500),
       st.floats(min_value=0.1, max_value=2.0))
@settings(max_examples=50, deadline=None)
def test_zipf_weights_normalized_decreasing(n, z):
    w = zipf_weights(n, z)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(w) <= 0)


def test_single_video_demand_equals_population():
    demand = generate_demand(_catalog(1), 1, (0.7, 0.9), (6, 6), seed=0)
    assert demand.shape == (1, 1)
    assert demand[0, 0] == pytest.approx(6.0)


def test_three_video_harmonic_normalization():
    # z = 1, population 6: weights 1, 1/2, 1/3 over harmonic sum 11/6
    demand = generate_demand(_catalog(3), 1, (1.0, 1.0), (6, 6), seed=3)
    values = np.sort(demand[0])[::-1]
    assert values == pytest.approx([36 / 11, 18 / 11, 12 / 11], abs=1e-9)


def test_demand_row_sums_equal_population():
    demand = generate_demand(_catalog(40), 8, (0.7, 0.9), (20, 30), seed=5)
    sums = demand.sum(axis=1)
    assert np.all(sums >= 20 - 1e-9)
    assert np.all(sums <= 30 + 1e-9)
    assert np.allclose(sums, np.round(sums))


def test_demand_rows_follow_zipf_profile():
    demand = generate_demand(_catalog(25), 4, (0.7, 0.9), (20, 30), seed=9)
    for i in range(4):
        row = np.sort(demand[i])[::-1]
        population = row.sum()
        # the sorted row must be a population-scaled Zipf weight vector
        ratio = row / row[0]
        exponent = -np.log(ratio[1]) / np.log(2.0)
        expected = population * zipf_weights(25, exponent)
        assert row == pytest.approx(expected, rel=1e-6)


def test_demand_is_seed_deterministic():
    a = generate_demand(_catalog(30), 5, (0.7, 0.9), (20, 30), seed=11)
    b = generate_demand(_catalog(30), 5, (0.7, 0.9), (20, 30), seed=11)
    c = generate_demand(_catalog(30), 5, (0.7, 0.9), (20, 30), seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_demand_input_validation():
    with pytest.raises(ValueError):
        generate_demand([], 3, (0.7, 0.9), (20, 30), seed=0)
    with pytest.raises(ValueError):
        generate_demand(_catalog(3), 0, (0.7, 0.9), (20, 30), seed=0)
    with pytest.raises(ValueError):
        generate_demand(_catalog(3), 2, (0.9, 0.7), (20, 30), seed=0)


def test_replicate_demand_for_pieces():
    demand = np.array([[1.0, 2.0], [3.0, 4.0]])
    split = [Video(0, 1, 1, 2, parent=0, piece_index=0),
             Video(1, 1, 1, 2, parent=0, piece_index=1),
             Video(2, 1, 1, 1, parent=1, piece_index=0)]
    out = replicate_demand_for_pieces(demand, split)
    assert out.shape == (2, 3)
    assert np.array_equal(out, [[1.0, 1.0, 2.0], [3.0, 3.0, 4.0]])


def test_vanishing_intensity_gives_empty_stream():
    demand = np.ones((2, 3))
    stream = generate_requests(demand, 10, 1e-4, seed=1)
    assert len(stream) == 0


def test_uniform_demand_splits_requests_evenly():
    demand = np.ones((2, 1))
    stream = generate_requests(demand, 1000, 100.0, seed=2)
    counts = np.bincount([r.node for r in stream.requests], minlength=2)
    total = counts.sum()
    # 3-sigma binomial band around 50/50
    sigma = np.sqrt(total * 0.25)
    assert abs(counts[0] - total / 2) < 3 * sigma


def test_intensity_calibration_within_five_percent():
    demand = np.ones((3, 4))
    stream = generate_requests(demand, 10_000, 5.0, seed=3)
    assert len(stream) / 10_000 == pytest.approx(5.0, rel=0.05)


def test_requests_exclude_cached_pairs_and_respect_weights():
    demand = np.array([[10.0, 0.0], [0.0, 10.0]])
    placement = Placement([{0}, set()])
    stream = generate_requests(demand, 200, 20.0, seed=4, placement=placement)
    assert len(stream) > 0
    for req in stream.requests:
        assert (req.node, req.video) == (1, 1)


def test_eligible_videos_restriction():
    demand = np.ones((1, 4))
    stream = generate_requests(demand, 100, 10.0, seed=5, eligible_videos=[2])
    assert {r.video for r in stream.requests} == {2}


def test_all_filtered_demand_raises():
    demand = np.array([[1.0]])
    with pytest.raises(ValueError):
        generate_requests(demand, 10, 1.0, seed=6, placement=Placement([{0}]))
    with pytest.raises(ValueError):
        generate_requests(np.zeros((1, 1)), 10, 1.0, seed=6)


def test_stream_bytes_identical_for_same_seed():
    demand = np.ones((2, 5))
    a = generate_requests(demand, 50, 8.0, seed=7)
    b = generate_requests(demand, 50, 8.0, seed=7)
    assert a.to_text() == b.to_text()
    assert sorted(r.slot for r in a.requests) == [r.slot for r in a.requests]


def test_stream_round_trips_through_text():
    demand = np.ones((2, 5))
    a = generate_requests(demand, 20, 4.0, seed=8)
    back = RequestStream.from_text(a.to_text(), a.slot_duration_s)
    assert back.requests == a.requests
