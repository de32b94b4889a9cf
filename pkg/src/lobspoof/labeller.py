"""Threshold rules that flag spoofing cancellations.

A cancellation is flagged when the cancelled volume is a large share of the
same-side 25-level depth, its price sits close to the same-side touch, and
mid-price volatility jumps shortly afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .features import FeatureFrame, FrameTable
from .orderbook import Side, from_fixed, to_fixed


@dataclass(frozen=True)
class Thresholds:
    t1: float = 0.25  # min cancelled / pre-cancel same-side cum_25
    t2: float = 0.01  # max relative distance to touch
    t3: float = 0.5  # min volatility variation after the cancel
    horizon_ms: int = 2000

    def __post_init__(self):
        if not self.t1 > 0:
            raise ValueError("t1 must be > 0")
        if self.t2 < 0:
            raise ValueError("t2 must be >= 0")
        if self.horizon_ms < 0:
            raise ValueError("horizon_ms must be >= 0")


@dataclass(frozen=True)
class SpoofingFlag:
    t0: int
    side: Side
    price: float
    cancelled_volume: float
    conditions: tuple[bool, bool, bool] = (True, True, True)
    index: int = -1  # frame index of the cancellation

    def to_json(self) -> str:
        return json.dumps(
            {
                "t0": self.t0,
                "side": self.side.label,
                "price": _dec(self.price),
                "cancelled_volume": _dec(self.cancelled_volume),
                "c": list(self.conditions),
            },
            separators=(",", ":"),
        )


def _dec(x: float) -> str:
    # frame floats come from 8-digit fixed point; round back before rendering
    return from_fixed(int(round(x * 1e8)))


def evaluate_conditions(frame: FeatureFrame, future_dsigma: float, th: Thresholds) -> tuple[bool, bool, bool]:
    """The three rule conditions for one cancellation frame.

    The depth reference is the same-side cum_25 before the cancel was applied.
    """
    if not frame.cancelled_volume > 0:
        raise ValueError("frame is not a cancellation")
    if not frame.usable or frame.distance is None:
        raise ValueError("frame has no same-side touch")
    c1 = frame.cancelled_volume > th.t1 * frame.pre_cum_same
    c2 = frame.distance <= th.t2
    c3 = future_dsigma > th.t3
    return bool(c1), bool(c2), bool(c3)


def future_max_dsigma(table: FrameTable, i: int, horizon_ms: int) -> float:
    """Max vol_variation over frames i.. with ts <= ts[i] + horizon_ms."""
    end = int(np.searchsorted(table.ts, table.ts[i] + horizon_ms, side="right"))
    return float(table.vol_variation[i:end].max())


def flag_spoofing(frames: FrameTable, th: Thresholds = Thresholds()) -> list[SpoofingFlag]:
    """Flag every cancellation frame satisfying all three conditions, in time order."""
    n = len(frames)
    if n == 0:
        return []
    canc = frames.cancelled_volume
    with np.errstate(invalid="ignore"):
        cand = (
            (canc > 0)
            & frames.usable
            & (canc > th.t1 * frames.pre_cum_same)
            & (frames.distance <= th.t2)
        )
    flags = []
    for i in np.flatnonzero(cand).tolist():
        dmax = future_max_dsigma(frames, i, th.horizon_ms)
        if dmax > th.t3:
            flags.append(
                SpoofingFlag(
                    t0=int(frames.ts[i]),
                    side=Side(int(frames.side[i])),
                    price=float(frames.update_price[i]),
                    cancelled_volume=float(canc[i]),
                    conditions=(True, True, True),
                    index=i,
                )
            )
    return flags


def write_flags(flags: Sequence[SpoofingFlag], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in flags:
            fh.write(f.to_json() + "\n")


def read_flags(path) -> list[SpoofingFlag]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                out.append(
                    SpoofingFlag(
                        t0=int(obj["t0"]),
                        side=Side.parse(obj["side"]),
                        price=to_fixed(obj["price"]) / 1e8,
                        cancelled_volume=to_fixed(obj["cancelled_volume"]) / 1e8,
                        conditions=tuple(bool(c) for c in obj["c"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"line {lineno}: bad flag record ({exc})") from None
    return out


def flag_times(flags: Sequence[SpoofingFlag]) -> np.ndarray:
    return np.array([f.t0 for f in flags], dtype=np.int64)
