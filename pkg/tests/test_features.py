import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobspoof.features import (
    FRAME_FIELDS,
    VolatilityState,
    _fill_gaps,
    distance_to_touch,
    read_frames_csv,
    replay,
    replay_book,
    replay_reference,
    update_volatility,
    volatility_variation,
    write_frames_csv,
)
from lobspoof.orderbook import SCALE, L2Update, OrderBook, Side
from lobspoof.stream import UpdateStream
from lobspoof.synthgen import random_stream

from oracles import pstdev, rebuild_book_np, touch_and_depth


def test_volatility_matches_statistics_pstdev():
    rng = np.random.default_rng(0)
    mids = 100 + np.cumsum(rng.normal(0, 0.01, 400))
    vs = VolatilityState(window=100, lag=20)
    sig = []
    for m in mids:
        _, s = update_volatility(vs, float(m))
        sig.append(s)
    for i in (0, 1, 50, 99, 100, 250, 399):
        ref = statistics.pstdev(mids[max(0, i - 99) : i + 1].tolist()) if i else 0.0
        assert sig[i] == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_volatility_variation_uses_lag():
    vs = VolatilityState(window=3, lag=2)
    for m in (1.0, 2.0, 3.0, 3.0, 3.0):
        update_volatility(vs, m)
    s = list(vs.sigmas)
    assert s[0] == pytest.approx(pstdev([1.0, 2.0, 3.0]))
    assert volatility_variation(vs) == pytest.approx((s[-1] - s[0]) / s[0])


def test_flat_mid_has_zero_variation():
    vs = VolatilityState(window=10, lag=3)
    for _ in range(30):
        update_volatility(vs, 50.0)
    assert vs.sigma == 0.0
    assert volatility_variation(vs) == 0.0


def test_distance_to_touch():
    book = OrderBook()
    book.apply_raw(0, 100 * SCALE, SCALE)
    assert distance_to_touch(book, Side.BID, 99 * SCALE) == pytest.approx(0.01)
    assert distance_to_touch(book, Side.ASK, 101 * SCALE) is None


def _stream(rows):
    return UpdateStream.from_updates(L2Update.make(i + 1, 10 * i, *r) for i, r in enumerate(rows))


def test_replay_frame_fields_by_hand():
    s = _stream([("bid", "99", "5"), ("ask", "101", "2"), ("bid", "98", "3"), ("bid", "99", "1"), ("bid", "99", "0")])
    ft = replay(s)
    f = ft.frame(3)
    assert (f.best_bid, f.best_ask) == (99.0, 101.0)
    assert f.delta_volume == -4.0 and f.cancelled_volume == 4.0
    assert f.cum_bid_25 == 4.0 and f.cum_ask_25 == 2.0
    assert f.pre_cum_same == 8.0
    assert f.distance == 0.0
    last = ft.frame(4)
    assert last.best_bid == 98.0 and last.distance == pytest.approx(1 / 98)
    assert not ft.frame(0).usable and ft.frame(0).distance is None


def test_kernel_equals_reference_on_random_stream():
    s = random_stream(5000, seed=11)
    ref, book = replay_reference(s.updates())
    ft = replay(s)
    for i in range(0, len(s), 7):
        a, b = ref[i], ft.frame(i)
        assert a == b, i
    fb = replay_book(s)
    assert fb["bids"] == book.bids and fb["asks"] == book.asks
    assert ft.anomalies == {"noop_removals": book.anomalies.noop_removals, "crossed": book.anomalies.crossed}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 10), st.integers(1, 30))
def test_kernel_equals_reference_property(seed, window, lag, depth):
    s = random_stream(400, seed=seed, levels=40)
    ref, _ = replay_reference(s.updates(), window, lag, depth)
    ft = replay(s, window, lag, depth)
    assert [ft.frame(i) for i in range(len(s))] == ref


def test_replay_touch_and_depth_match_rebuild():
    s = random_stream(20_000, seed=5)
    out = replay_book(s)
    for k in (1, 10, 999, 5000, 19_999):
        bids, asks = rebuild_book_np(s.side, s.price, s.size, k + 1)
        bb, ba, cb, ca = touch_and_depth(bids, asks)
        assert out["best_bid"][k] == (bb or 0)
        assert out["best_ask"][k] == (ba or 0)
        assert (out["cum_bid"][k], out["cum_ask"][k]) == (cb, ca)


def test_fill_gaps():
    x = np.array([np.nan, 2.0, np.nan, 4.0, np.nan])
    assert _fill_gaps(x).tolist() == [2.0, 2.0, 2.0, 4.0, 4.0]
    assert _fill_gaps(np.array([np.nan, np.nan])).tolist() == [0.0, 0.0]


def test_projection_shape_and_columns():
    s = random_stream(300, seed=2)
    ft = replay(s)
    X = ft.projection()
    assert X.shape == (300, 7)
    assert np.all(np.isfinite(X))
    ok = ft.usable
    assert np.allclose(X[ok, 0], (ft.best_bid[ok] + ft.best_ask[ok]) / 2)
    assert np.allclose(X[ok, 1], ft.best_ask[ok] - ft.best_bid[ok])


def test_frames_csv_round_trip(tmp_path):
    s = random_stream(200, seed=9)
    ft = replay(s)
    write_frames_csv(ft, tmp_path / "f.csv")
    back = read_frames_csv(tmp_path / "f.csv")
    assert tuple(back) == FRAME_FIELDS
    for name in FRAME_FIELDS:
        np.testing.assert_array_equal(back[name], getattr(ft, name))


def test_bad_window_parameters():
    with pytest.raises(ValueError):
        replay(random_stream(10), window=0)
    with pytest.raises(ValueError):
        VolatilityState(window=5, lag=0)
