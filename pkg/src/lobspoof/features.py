"""Per-update trading signals.

Each update yields one frame: touch prices, the update's size change and
price, rolling mid-price volatility and its relative change over a lag,
25-level cumulative depth on both sides, the update's relative distance to
the same-side touch, and the cancelled volume.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .orderbook import DEFAULT_DEPTH, SCALE, EffectKind, L2Update, OrderBook, Side, UpdateEffect
from .stream import UpdateStream

DEFAULT_VOL_WINDOW = 100
DEFAULT_VOL_LAG = 20
EPS_SIGMA = 1e-12

FRAME_FIELDS = (
    "ts",
    "best_bid",
    "best_ask",
    "delta_volume",
    "update_price",
    "volatility",
    "vol_variation",
    "cum_bid_25",
    "cum_ask_25",
    "distance",
    "cancelled_volume",
    "side",
)

# classifier inputs; "current bid-ask" is encoded as mid and spread
PROJECTION = ("mid", "spread", "delta_volume", "update_price", "volatility", "cum_bid_25", "cum_ask_25")


@dataclass(frozen=True)
class FeatureFrame:
    ts: int
    best_bid: Optional[float]
    best_ask: Optional[float]
    delta_volume: float
    update_price: float
    volatility: float
    vol_variation: float
    cum_bid_25: float
    cum_ask_25: float
    distance: Optional[float]
    cancelled_volume: float
    side: Side
    # auxiliaries for labelling; not part of the dump format
    pre_cum_same: float = 0.0
    usable: bool = True


@dataclass
class VolatilityState:
    window: int = DEFAULT_VOL_WINDOW
    lag: int = DEFAULT_VOL_LAG
    mids: deque = field(default_factory=deque)
    sigmas: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1 or self.lag < 1:
            raise ValueError("window and lag must be positive")
        self.mids = deque(self.mids, maxlen=self.window)
        self.sigmas = deque(self.sigmas, maxlen=self.lag + 1)

    @property
    def sigma(self) -> float:
        return self.sigmas[-1] if self.sigmas else 0.0


def _pstdev(xs) -> float:
    n = len(xs)
    if n < 2:
        return 0.0
    acc = 0.0
    for x in xs:
        acc += x
    mean = acc / n
    acc = 0.0
    for x in xs:
        d = x - mean
        acc += d * d
    return math.sqrt(acc / n)


def update_volatility(state: VolatilityState, mid: float) -> tuple[VolatilityState, float]:
    """Record a mid observation; return the population std-dev of the retained window."""
    if not mid > 0:
        raise ValueError("mid must be positive")
    state.mids.append(mid)
    sigma = _pstdev(state.mids)
    state.sigmas.append(sigma)
    return state, sigma


def volatility_variation(state: VolatilityState) -> float:
    """Relative change of sigma against the value ``lag`` observations back.

    Falls back to the oldest recorded sigma while history is short.
    """
    if not state.sigmas:
        raise ValueError("no volatility recorded yet")
    ref = state.sigmas[0]
    return (state.sigmas[-1] - ref) / max(ref, EPS_SIGMA)


def distance_to_touch(book: OrderBook, side: Side, price: int) -> Optional[float]:
    """Relative distance of ``price`` to the same-side touch, or None without a touch."""
    touch = book.best(side)
    if touch is None:
        return None
    return abs(price - touch) / touch


def extract_frame(
    book: OrderBook,
    u: L2Update,
    effect: UpdateEffect,
    vstate: VolatilityState,
    pre_cum_same: int = 0,
    depth: int = DEFAULT_DEPTH,
) -> FeatureFrame:
    """Build the frame for ``u``; ``book`` must already reflect it.

    Updates ``vstate`` when a mid price exists; otherwise the previous
    sigma and sigma-variation are carried forward and the frame is marked
    unusable.
    """
    bb, ba = book.top_of_book()
    usable = bb is not None and ba is not None
    if usable:
        update_volatility(vstate, (bb + ba) / (2 * SCALE))
    sigma = vstate.sigma
    dsigma = volatility_variation(vstate) if vstate.sigmas else 0.0
    dist = distance_to_touch(book, u.side, u.price) if usable else None
    return FeatureFrame(
        ts=u.ts,
        best_bid=None if bb is None else bb / SCALE,
        best_ask=None if ba is None else ba / SCALE,
        delta_volume=effect.delta_volume / SCALE,
        update_price=u.price / SCALE,
        volatility=sigma,
        vol_variation=dsigma,
        cum_bid_25=book.cumulative_volume(Side.BID, depth) / SCALE,
        cum_ask_25=book.cumulative_volume(Side.ASK, depth) / SCALE,
        distance=dist,
        cancelled_volume=effect.cancelled_volume / SCALE,
        side=u.side,
        pre_cum_same=pre_cum_same / SCALE,
        usable=usable,
    )


def replay_reference(
    updates: Iterable[L2Update],
    window: int = DEFAULT_VOL_WINDOW,
    lag: int = DEFAULT_VOL_LAG,
    depth: int = DEFAULT_DEPTH,
) -> tuple[list[FeatureFrame], OrderBook]:
    """Object-level replay; slow, used as the reference for `replay`."""
    book = OrderBook()
    vs = VolatilityState(window, lag)
    frames = []
    for u in updates:
        pre = book.cumulative_volume(u.side, depth)
        effect = book.apply(u)
        frames.append(extract_frame(book, u, effect, vs, pre, depth))
    return frames, book


@dataclass
class FrameTable:
    """Columnar frames for a whole stream (floats in price/volume units)."""

    ts: np.ndarray
    best_bid: np.ndarray  # NaN when absent
    best_ask: np.ndarray
    delta_volume: np.ndarray
    update_price: np.ndarray
    volatility: np.ndarray
    vol_variation: np.ndarray
    cum_bid_25: np.ndarray
    cum_ask_25: np.ndarray
    distance: np.ndarray  # NaN when not computable
    cancelled_volume: np.ndarray
    side: np.ndarray
    pre_cum_same: np.ndarray
    usable: np.ndarray
    kind: np.ndarray
    anomalies: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ts)

    def frame(self, i: int) -> FeatureFrame:
        bb, ba, dist = self.best_bid[i], self.best_ask[i], self.distance[i]
        return FeatureFrame(
            ts=int(self.ts[i]),
            best_bid=None if np.isnan(bb) else float(bb),
            best_ask=None if np.isnan(ba) else float(ba),
            delta_volume=float(self.delta_volume[i]),
            update_price=float(self.update_price[i]),
            volatility=float(self.volatility[i]),
            vol_variation=float(self.vol_variation[i]),
            cum_bid_25=float(self.cum_bid_25[i]),
            cum_ask_25=float(self.cum_ask_25[i]),
            distance=None if np.isnan(dist) else float(dist),
            cancelled_volume=float(self.cancelled_volume[i]),
            side=Side(int(self.side[i])),
            pre_cum_same=float(self.pre_cum_same[i]),
            usable=bool(self.usable[i]),
        )

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))

    def projection(self) -> np.ndarray:
        """(n, 7) classifier inputs; missing touches are filled from neighbours."""
        bb = _fill_gaps(self.best_bid)
        ba = _fill_gaps(self.best_ask)
        cols = [
            (bb + ba) / 2.0,
            ba - bb,
            self.delta_volume,
            self.update_price,
            self.volatility,
            self.cum_bid_25,
            self.cum_ask_25,
        ]
        return np.column_stack(cols).astype(np.float64)


def _fill_gaps(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    ok = ~np.isnan(x)
    if ok.all() or not ok.any():
        return np.nan_to_num(x, nan=0.0)
    idx = np.where(ok, np.arange(len(x)), 0)
    np.maximum.accumulate(idx, out=idx)
    out = x[idx]
    first = int(np.argmax(ok))
    out[:first] = x[first]
    return out


def replay(
    stream: UpdateStream,
    window: int = DEFAULT_VOL_WINDOW,
    lag: int = DEFAULT_VOL_LAG,
    depth: int = DEFAULT_DEPTH,
) -> FrameTable:
    """Replay ``stream`` through the compiled book and emit one frame per update."""
    from ._kernel import replay_kernel

    if window < 1 or lag < 1 or depth < 1:
        raise ValueError("window, lag and depth must be positive")
    out = replay_kernel(
        np.ascontiguousarray(stream.side, dtype=np.int8),
        np.ascontiguousarray(stream.price, dtype=np.int64),
        np.ascontiguousarray(stream.size, dtype=np.int64),
        depth,
        window,
        lag,
    )
    (bb, ba, cb, ca, pre, delta, canc, kind, sig, dsig, dist, usable, noop, crossed) = out[:14]
    s = float(SCALE)
    table = FrameTable(
        ts=np.asarray(stream.ts, dtype=np.int64).copy(),
        best_bid=np.where(bb > 0, bb / s, np.nan),
        best_ask=np.where(ba > 0, ba / s, np.nan),
        delta_volume=delta / s,
        update_price=stream.price / s,
        volatility=sig,
        vol_variation=dsig,
        cum_bid_25=cb / s,
        cum_ask_25=ca / s,
        distance=dist,
        cancelled_volume=canc / s,
        side=np.asarray(stream.side, dtype=np.int8).copy(),
        pre_cum_same=pre / s,
        usable=usable,
        kind=kind,
        anomalies={"noop_removals": int(noop), "crossed": int(crossed)},
    )
    return table


def replay_book(stream: UpdateStream, depth: int = DEFAULT_DEPTH) -> dict:
    """Final book from the compiled path plus per-update touch/depth columns (fixed-point)."""
    from ._kernel import replay_kernel

    out = replay_kernel(
        np.ascontiguousarray(stream.side, dtype=np.int8),
        np.ascontiguousarray(stream.price, dtype=np.int64),
        np.ascontiguousarray(stream.size, dtype=np.int64),
        depth,
        2,
        1,
    )
    bk, bs, ak, az = out[14:]
    return {
        "best_bid": out[0],
        "best_ask": out[1],
        "cum_bid": out[2],
        "cum_ask": out[3],
        "bids": dict(zip((-bk).tolist(), bs.tolist())),
        "asks": dict(zip(ak.tolist(), az.tolist())),
        "noop_removals": int(out[12]),
        "crossed": int(out[13]),
    }


def write_frames_csv(table: FrameTable, path) -> None:
    """Dump the 12 frame fields in FRAME_FIELDS order; absent values are empty cells."""
    cols = [getattr(table, f) for f in FRAME_FIELDS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FRAME_FIELDS)
        for row in zip(*(c.tolist() for c in cols)):
            out = []
            for name, v in zip(FRAME_FIELDS, row):
                if name == "side":
                    out.append("bid" if v == 0 else "ask")
                elif isinstance(v, float) and math.isnan(v):
                    out.append("")
                else:
                    out.append(repr(v) if isinstance(v, float) else str(v))
            w.writerow(out)


def read_frames_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FRAME_FIELDS:
            raise ValueError(f"unexpected frame header {header}")
        rows = list(reader)
    out = {}
    for j, name in enumerate(FRAME_FIELDS):
        col = [r[j] for r in rows]
        if name == "ts":
            out[name] = np.array([int(v) for v in col], dtype=np.int64)
        elif name == "side":
            out[name] = np.array([0 if v == "bid" else 1 for v in col], dtype=np.int8)
        else:
            out[name] = np.array([float(v) if v != "" else np.nan for v in col], dtype=np.float64)
    return out
