import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rewritable.channel import CellState, UniformChannelParams, sample_states
from rewritable.errors import InvalidParams, OutOfSupport
from rewritable.uniform_c1 import (
    build_c1_layout,
    c1_decode_cell,
    c1_encode_batch,
    c1_encode_cell,
    c1_rate,
    c1_rate_decomposition,
    n_intervals,
)

A, B = 1 / 3, 1 / 6


def overlap(pieces, lo, hi):
    return sum(max(0.0, min(h, hi) - max(l, lo)) for l, h in pieces)


def test_layout_counts():
    layout = build_c1_layout(A, B, 5)
    assert layout.n_intervals == 3 and layout.n_regions == 15
    other = build_c1_layout(0.25, 0.05, 4)
    assert other.n_intervals == 4 and other.n_regions == 16
    assert c1_rate(0.25, 0.05, 4) == pytest.approx(4.0, abs=1e-12)


def test_rates():
    assert c1_rate(A, B, 5) == pytest.approx(math.log2(15), abs=1e-12)
    assert c1_rate(A, B, 2) == pytest.approx(math.log2(6), abs=1e-12)
    assert round(c1_rate(A, B, 5), 4) == 3.9069


def test_first_region_geometry():
    layout = build_c1_layout(A, B, 5)
    (l1, h1), (l2, h2) = layout.pieces((0, 1))
    assert (l1, h1) == pytest.approx((-A / 2, -A / 2 + A / 5))
    assert (l2, h2) == pytest.approx((A / 2, A / 2 + A / 5))


def test_decomposition_identity():
    capacity, loss = c1_rate_decomposition(A, B, 5)
    assert capacity - loss == pytest.approx(c1_rate(A, B, 5), abs=1e-12)
    assert loss == pytest.approx(math.log2((1 + B / A) / (1 + B / (1 + A))), abs=1e-12)
    with pytest.raises(InvalidParams):
        c1_rate_decomposition(0.3, 0.1, 3)


@pytest.mark.parametrize("kappa", [1, 2.5, 0])
def test_rejects_bad_kappa(kappa):
    with pytest.raises(InvalidParams):
        build_c1_layout(A, B, kappa)


@pytest.mark.parametrize("a,b", [(A, 0.0), (A, A), (A, 0.5)])
def test_rejects_bad_channel(a, b):
    with pytest.raises(InvalidParams):
        build_c1_layout(a, b, 3)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.05, 2.0),
    frac=st.floats(0.01, 0.95),
    kappa=st.integers(2, 12),
    sfrac=st.floats(0.0, 1.0),
    data=st.data(),
)
def test_accessible_width_is_a_over_kappa(a, frac, kappa, sfrac, data):
    b = a * frac
    layout = build_c1_layout(a, b, kappa)
    i = data.draw(st.integers(0, layout.n_intervals - 1))
    t = data.draw(st.integers(1, kappa))
    centre = layout.stimulus(i) + sfrac * b
    width = overlap(layout.pieces((i, t)), centre - a / 2, centre + a / 2)
    assert width == pytest.approx(a / kappa, rel=1e-9, abs=1e-12)


def test_regions_tile_intervals_without_overlap():
    layout = build_c1_layout(A, B, 5)
    pieces = sorted(p for r in layout.regions for p in layout.pieces(r))
    for (l0, h0), (l1, h1) in zip(pieces, pieces[1:]):
        assert h0 <= l1 + 1e-12
    assert pieces[0][0] == pytest.approx(-A / 2)
    assert pieces[-1][1] == pytest.approx(layout.n_intervals * (A + B) - A / 2)


def test_half_open_boundaries():
    layout = build_c1_layout(A, B, 5)
    lo, hi = layout.pieces((0, 2))[0]
    assert c1_decode_cell(layout, lo) == (0, 2)
    assert c1_decode_cell(layout, hi) == (0, 3)
    with pytest.raises(OutOfSupport):
        c1_decode_cell(layout, -A / 2 - 1e-9)
    end = max(hi for r in layout.regions for _, hi in layout.pieces(r))
    assert end == pytest.approx(layout.n_intervals * (A + B) - A / 2)
    with pytest.raises(OutOfSupport):
        c1_decode_cell(layout, end)


def test_mean_writes_and_round_trip():
    layout = build_c1_layout(A, B, 5)
    rng = np.random.default_rng(11)
    n = 10**6
    regions = rng.integers(0, layout.n_regions, n)
    tau, y = c1_encode_batch(layout, regions, sample_states(layout.channel, rng, n), rng)
    assert abs(tau.mean() / 5 - 1) <= 0.01
    assert np.array_equal(layout.decode_ids(y), regions)
    # entropy of the realised region distribution
    p = np.bincount(regions) / n
    assert -(p * np.log2(p)).sum() == pytest.approx(c1_rate(A, B, 5), abs=1e-3)


def test_state_independence_of_mean():
    layout = build_c1_layout(A, B, 5)
    rng = np.random.default_rng(12)
    n = 400_000
    regions = rng.integers(0, layout.n_regions, n)
    lo, _ = c1_encode_batch(layout, regions, np.zeros(n), rng)
    hi, _ = c1_encode_batch(layout, regions, np.full(n, B), rng)
    se = math.sqrt(lo.var() / n + hi.var() / n)
    assert abs(lo.mean() - hi.mean()) <= 3 * se


@pytest.mark.parametrize("s", [0.0, B / 3, 2 * B / 3, B])
def test_hit_probability_is_one_over_kappa(s):
    layout = build_c1_layout(A, B, 5)
    rng = np.random.default_rng(13)
    # single attempts at interval 1: each of the 5 regions is hit w.p. 1/5
    y = layout.stimulus(1) + s + rng.uniform(-A / 2, A / 2, 200_000)
    ids = layout.decode_ids(y)
    assert np.all(ids // 5 == 1)
    counts = np.bincount(ids - 5, minlength=5)
    assert stats.chisquare(counts).pvalue > 0.001


def test_scalar_and_batch_agree():
    layout = build_c1_layout(A, B, 3)
    rng = np.random.default_rng(14)
    taus = []
    for _ in range(3000):
        region = layout.regions[rng.integers(layout.n_regions)]
        state = CellState(rng.uniform(0, B))
        trace = c1_encode_cell(layout, region, state, rng)
        assert c1_decode_cell(layout, trace.final_y) == region
        assert all(x == layout.stimulus(region[0]) for x in trace.stimuli)
        taus.append(trace.tau)
    taus = np.array(taus)
    assert abs(taus.mean() - 3) <= 3 * taus.std(ddof=1) / math.sqrt(taus.size)


def test_fuzz_round_trips():
    rng = np.random.default_rng(15)
    for a, b, kappa in [(0.25, 0.05, 4), (0.5, 0.4, 2), (0.1, 0.02, 7)]:
        layout = build_c1_layout(a, b, kappa)
        n = 10**5
        regions = rng.integers(0, layout.n_regions, n)
        _, y = c1_encode_batch(layout, regions, rng.uniform(0, b, n), rng)
        assert np.array_equal(layout.decode_ids(y), regions)


def test_n_intervals_float_floor():
    # (1 + a + B)/(a + B) is exactly 3 but may round below it
    assert n_intervals(A, B) == 3
    assert n_intervals(0.1, 0.1) == 6
    assert isinstance(UniformChannelParams(A, B), UniformChannelParams)
