"""Seeded synthetic L2 streams with injected spoofing episodes.

Background: a two-sided book on a tick grid whose mid follows a mean-reverting
random walk; level sizes are log-normal and clipped so that no background
cancellation can reach a large share of the 25-level depth. The generator
tracks rolling mid-price volatility exactly as the feature pass does and
steers touch moves so the volatility variation stays below ``guard``.

Each scheduled spoof is placed near the touch, held, cancelled and then,
when successful, followed by a fast one-directional drift that pushes the
volatility variation past ``drift_target`` within the labelling horizon.
Spoofs with ``drift_ticks == 0`` are cancelled without any price reaction and
act as hard negatives.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .orderbook import DEFAULT_DEPTH, SCALE, OrderBook, Side, from_fixed, to_fixed
from .stream import UpdateStream

BACKGROUND, SPOOF_PLACE, SPOOF_CANCEL, DRIFT = 0, 1, 2, 3
PROVENANCE_NAMES = ("background", "spoof_place", "spoof_cancel", "drift")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpoofSpec:
    start_ms: int
    side: str = "bid"
    volume_mult: float = 1.5  # spoof volume / same-side cum_25 at placement
    distance: float = 0.002  # relative distance behind the touch
    hold_ms: int = 4000
    drift_ticks: int = 20  # 0: cancelled without price reaction
    volume: Optional[str] = None  # absolute volume, overrides volume_mult

    @property
    def successful(self) -> bool:
        return self.drift_ticks > 0


@dataclass
class ScenarioConfig:
    duration_ms: int = 600_000
    mean_interval_ms: float = 30.0
    start_price: str = "100.00"
    tick: str = "0.01"
    base_size: str = "10"
    size_sigma: float = 0.35
    size_clip: tuple[float, float] = (0.5, 2.0)
    lot: str = "0.001"
    gap_p: float = 0.5  # geometric parameter for tick gaps between levels
    depth_min: int = 30
    depth_max: int = 60
    touch_prob: float = 0.3
    deep_prob: float = 0.05
    max_spread_ticks: int = 6
    reversion: float = 0.05
    vol_window: int = 100
    vol_lag: int = 20
    guard: float = 0.25
    horizon_ms: int = 2000
    drift_target: float = 1.0
    drift_interval_ms: float = 6.0
    drift_budget_ms: int = 1500
    t1: float = 0.25
    t2: float = 0.01
    t3: float = 0.5
    spoofs: list[SpoofSpec] = field(default_factory=list)
    seed: int = 0
    max_updates: Optional[int] = None

    def validate(self) -> None:
        if self.duration_ms <= 0 or self.mean_interval_ms <= 0:
            raise ValueError("duration and interval must be positive")
        if not self.guard < self.t3 < self.drift_target:
            raise ValueError("need guard < t3 < drift_target")
        lo, hi = self.size_clip
        # worst background cancel vs thinnest possible 25-level depth
        if hi / (DEFAULT_DEPTH * lo) >= self.t1:
            raise ValueError("size_clip lets background cancels reach t1")
        if self.depth_min < DEFAULT_DEPTH + 2:
            raise ValueError("depth_min must exceed the 25-level depth")
        per_side: dict[str, list[SpoofSpec]] = {"bid": [], "ask": []}
        for s in self.spoofs:
            if s.side not in per_side:
                raise ValueError(f"bad spoof side {s.side!r}")
            if s.volume is None and not s.volume_mult > self.t1:
                raise ValueError("spoof volume multiplier must exceed t1")
            if not 0 < s.distance < self.t2:
                raise ValueError("spoof distance must lie in (0, t2)")
            if s.hold_ms <= 0 or s.drift_ticks < 0:
                raise ValueError("bad spoof hold/drift")
            per_side[s.side].append(s)
        for side, specs in per_side.items():
            specs = sorted(specs, key=lambda s: s.start_ms)
            for a, b in zip(specs, specs[1:]):
                if b.start_ms <= a.start_ms + a.hold_ms + self.drift_budget_ms:
                    raise ValueError(f"overlapping {side} spoofs at {a.start_ms} and {b.start_ms}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["size_clip"] = list(self.size_clip)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys {sorted(unknown)}")
        d = dict(d)
        d["spoofs"] = [SpoofSpec(**s) for s in d.get("spoofs", [])]
        if "size_clip" in d:
            d["size_clip"] = tuple(d["size_clip"])
        return cls(**d)


@dataclass
class SpoofRecord:
    side: str
    price: str
    volume: str
    place_ts: int
    cancel_ts: int
    successful: bool
    place_index: int
    cancel_index: int


@dataclass
class GroundTruth:
    spoofs: list[SpoofRecord]
    provenance: np.ndarray  # int8 per update

    def cancel_times(self, successful_only: bool = True) -> list[int]:
        return [s.cancel_ts for s in self.spoofs if s.successful or not successful_only]

    def truncate(self, n: int) -> "GroundTruth":
        return GroundTruth([s for s in self.spoofs if s.cancel_index < n], self.provenance[:n].copy())

    def to_json(self) -> dict:
        prov = self.provenance.tolist()
        rle: list[list[int]] = []
        for v in prov:
            if rle and rle[-1][0] == v:
                rle[-1][1] += 1
            else:
                rle.append([v, 1])
        return {
            "spoofs": [asdict(s) for s in self.spoofs],
            "provenance_names": list(PROVENANCE_NAMES),
            "provenance_rle": rle,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        prov = [v for v, k in d["provenance_rle"] for _ in range(k)]
        return cls([SpoofRecord(**s) for s in d["spoofs"]], np.array(prov, dtype=np.int8))


class _VolTracker:
    """Rolling std of 2*mid in ticks, exact integer moments."""

    __slots__ = ("win", "mids", "s1", "s2", "sigmas")

    def __init__(self, win: int, lag: int):
        self.win = win
        self.mids: deque = deque()
        self.s1 = 0
        self.s2 = 0
        self.sigmas: deque = deque(maxlen=lag + 1)

    def _sigma_after(self, x: int) -> float:
        n = len(self.mids)
        s1, s2 = self.s1 + x, self.s2 + x * x
        if n == self.win:
            old = self.mids[0]
            s1 -= old
            s2 -= old * old
        else:
            n += 1
        if n < 2:
            return 0.0
        return math.sqrt(n * s2 - s1 * s1) / n

    def _ref_after(self) -> Optional[float]:
        sig = self.sigmas
        if not sig:
            return None
        return sig[1] if len(sig) == sig.maxlen else sig[0]

    def peek(self, x: int) -> float:
        sigma = self._sigma_after(x)
        ref = self._ref_after()
        if ref is None:
            return 0.0
        return (sigma - ref) / max(ref, 1e-12)

    def peek_worst(self, x: int) -> float:
        """Variation of the post-move sigma against the smallest sigma still in the lag ring.

        Later frames are compared against those values, so this bounds the
        variation they will see if the mid then stays put.
        """
        sigma = self._sigma_after(x)
        sig = list(self.sigmas)[1:] + [sigma]
        ref = min(sig)
        return (max(sig) - ref) / max(ref, 1e-12)

    def push(self, x: int) -> float:
        sigma = self._sigma_after(x)
        ref = self._ref_after()
        self.mids.append(x)
        self.s1 += x
        self.s2 += x * x
        if len(self.mids) > self.win:
            old = self.mids.popleft()
            self.s1 -= old
            self.s2 -= old * old
        self.sigmas.append(sigma)
        if ref is None:
            return 0.0
        return (sigma - ref) / max(ref, 1e-12)

    @property
    def dsigma(self) -> float:
        sig = self.sigmas
        if not sig:
            return 0.0
        return (sig[-1] - sig[0]) / max(sig[0], 1e-12)


class _Gen:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.tick = to_fixed(cfg.tick)
        self.lot = to_fixed(cfg.lot)
        self.base = to_fixed(cfg.base_size)
        self.book = OrderBook()
        self.vol = _VolTracker(cfg.vol_window, cfg.vol_lag)
        self.rows: list[tuple[int, int, int, int, int]] = []
        self.prov: list[int] = []
        self.spoof_at: dict[int, Optional[int]] = {0: None, 1: None}  # side -> tick
        self.t = 0.0
        self.seq = 0
        start = to_fixed(cfg.start_price) // self.tick
        self.anchor = 2 * start
        self.limit = cfg.max_updates if cfg.max_updates is not None else 1 << 62
        # (from, until) spans around unsuccessful cancels where the guard is active
        lead = 3 * cfg.vol_lag * cfg.mean_interval_ms
        self.quiet = sorted(
            (s.start_ms + s.hold_ms - lead, s.start_ms + s.hold_ms + cfg.horizon_ms + 250)
            for s in cfg.spoofs
            if not s.successful
        )
        self.qi = 0
        self.done = False

    # ---------------------------------------------------------------- helpers

    def normal(self) -> float:
        u1 = self.rng.random()
        u2 = self.rng.random()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def expo(self, mean: float) -> float:
        return -math.log(1.0 - self.rng.random()) * mean

    def gap(self) -> int:
        g = 1
        p = self.cfg.gap_p
        while self.rng.random() > p and g < 8:
            g += 1
        return g

    def level_size(self) -> int:
        lo, hi = self.cfg.size_clip
        f = min(hi, max(lo, math.exp(self.cfg.size_sigma * self.normal())))
        units = int(round(self.base * f / self.lot)) * self.lot
        lo_u = -(-int(self.base * lo) // self.lot) * self.lot
        hi_u = int(self.base * hi) // self.lot * self.lot
        return min(hi_u, max(lo_u, units))

    def touch(self, side: int) -> int:
        return self.book.best(Side(side)) // self.tick

    def rank_tick(self, side: int, r: int) -> int:
        return self.book.price_at_rank(Side(side), r) // self.tick

    def emit(self, side: int, tick: int, size: int, tag: int) -> None:
        if len(self.rows) >= self.limit:
            self.done = True
            return
        self.book.apply_raw(side, tick * self.tick, size)
        self.rows.append((self.seq, int(self.t), side, tick * self.tick, size))
        self.prov.append(tag)
        if self.seq:
            self.seq += 1
        bb, ba = self.book.top_of_book()
        if bb is not None and ba is not None:
            self.vol.push((bb + ba) // self.tick)

    # ---------------------------------------------------------------- setup

    def snapshot(self) -> None:
        start = to_fixed(self.cfg.start_price) // self.tick
        n = (self.cfg.depth_min + self.cfg.depth_max) // 2
        rows = []
        p = start - 1
        for _ in range(n):
            rows.append((0, p))
            p -= self.gap()
        p = start + 1
        for _ in range(n):
            rows.append((1, p))
            p += self.gap()
        for side, tick in rows:
            self.emit(side, tick, self.level_size(), BACKGROUND)
        self.snapshot_rows = len(self.rows)
        self.seq = 1

    # ---------------------------------------------------------------- background

    def _touch_options(self) -> list[tuple[str, int, int]]:
        """Feasible touch moves as (name, side, resulting 2*mid)."""
        bb, ba = self.touch(0), self.touch(1)
        opts = []
        if ba - bb >= 2:
            opts.append(("improve", 0, bb + 1 + ba))
            opts.append(("improve", 1, bb + ba - 1))
        for side in (0, 1):
            if self.book.n_levels(Side(side)) > 1 and self.spoof_at[side] != self.touch(side):
                nxt = self.rank_tick(side, 1)
                opts.append(("deplete", side, nxt + ba if side == 0 else bb + nxt))
        return opts

    def _do_touch(self, name: str, side: int) -> None:
        if name == "improve":
            t = self.touch(side) + (1 if side == 0 else -1)
            self.emit(side, t, self.level_size(), BACKGROUND)
        else:
            self.emit(side, self.touch(side), 0, BACKGROUND)

    def _resize(self) -> None:
        side = 0 if self.rng.random() < 0.5 else 1
        n = self.book.n_levels(Side(side))
        r = 0
        while self.rng.random() > 0.15 and r < n - 1:
            r += 1
        tick = self.rank_tick(side, r)
        if tick == self.spoof_at[side]:
            tick = self.rank_tick(side, r + 1 if r + 1 < n else r - 1)
        self.emit(side, tick, self.level_size(), BACKGROUND)

    def _deep(self, side: int, add: bool) -> None:
        if add:
            worst = self.rank_tick(side, -1)
            t = worst - self.gap() if side == 0 else worst + self.gap()
            if t <= 0:
                return
            self.emit(side, t, self.level_size(), BACKGROUND)
        else:
            t = self.rank_tick(side, -1)
            if t != self.spoof_at[side]:
                self.emit(side, t, 0, BACKGROUND)

    def background(self, drifting: bool) -> None:
        cfg = self.cfg
        for side in (0, 1):
            n = self.book.n_levels(Side(side))
            if n < cfg.depth_min:
                self._deep(side, True)
                return
            if n > cfg.depth_max:
                self._deep(side, False)
                return
        u = self.rng.random()
        if u < cfg.deep_prob:
            side = 0 if self.rng.random() < 0.5 else 1
            self._deep(side, self.rng.random() < 0.5)
            return
        bb, ba = self.touch(0), self.touch(1)
        mid2 = bb + ba
        plan = None  # None -> resize (mid unchanged)
        if not drifting and u < cfg.deep_prob + cfg.touch_prob:
            opts = self._touch_options()
            p_up = min(0.85, max(0.15, 0.5 + cfg.reversion * (self.anchor - mid2) / 2))
            up = self.rng.random() < p_up
            spread = ba - bb
            want_improve = spread >= cfg.max_spread_ticks or (spread >= 2 and self.rng.random() < 0.5)
            for name, side, m2 in opts:
                is_up = m2 > mid2
                if is_up == up and (name == "improve") == want_improve:
                    plan = (name, side, m2)
                    break
            if plan is None:
                for name, side, m2 in opts:
                    if (m2 > mid2) == up:
                        plan = (name, side, m2)
                        break
        # after an unsuccessful spoof, keep the variation below `guard` for the labelling horizon
        target = plan[2] if plan else mid2
        while self.qi < len(self.quiet) and self.quiet[self.qi][1] < self.t:
            self.qi += 1
        quiet = self.qi < len(self.quiet) and self.quiet[self.qi][0] <= self.t
        if quiet and self.vol.peek_worst(target) > cfg.guard:
            cands = [(self.vol.peek_worst(mid2), None)]
            if not drifting:
                for o in self._touch_options():
                    cands.append((self.vol.peek_worst(o[2]), o))
            cands.sort(key=lambda c: c[0])
            plan = cands[0][1]
        if plan is None:
            self._resize()
        else:
            self._do_touch(plan[0], plan[1])

    # ---------------------------------------------------------------- spoofs

    def place(self, spec: SpoofSpec) -> tuple[int, int]:
        side = 0 if spec.side == "bid" else 1
        touch = self.touch(side)
        d = max(1, int(round(spec.distance * touch)))
        occupied = {self.book.price_at_rank(Side(side), r) // self.tick for r in range(min(60, self.book.n_levels(Side(side))))}
        tick = None
        for k in range(d, 0, -1):
            cand = touch - k if side == 0 else touch + k
            if cand not in occupied:
                tick = cand
                break
        if tick is None:
            k = d + 1
            while True:
                cand = touch - k if side == 0 else touch + k
                if cand not in occupied:
                    tick = cand
                    break
                k += 1
        if spec.volume is not None:
            vol = to_fixed(spec.volume)
        else:
            cum = self.book.cumulative_volume(Side(side), DEFAULT_DEPTH)
            vol = int(round(spec.volume_mult * cum / self.lot)) * self.lot
        self.emit(side, tick, vol, SPOOF_PLACE)
        self.spoof_at[side] = tick
        return tick, vol

    def cancel(self, side: int) -> None:
        tick = self.spoof_at[side]
        self.emit(side, tick, 0, SPOOF_CANCEL)
        self.spoof_at[side] = None

    def drift_step(self, direction: int, step: int) -> None:
        # up: lift the bid by `step` ticks, consuming asks in the way; down mirrors it
        near, far = (0, 1) if direction > 0 else (1, 0)
        sgn = 1 if direction > 0 else -1
        target = self.touch(near) + sgn * step
        while True:
            ft = self.touch(far)
            if (ft - target) * sgn > 0:
                break
            if ft == self.spoof_at[far] or self.book.n_levels(Side(far)) < 2:
                target = ft - sgn
                break
            self.emit(far, ft, 0, DRIFT)
        if (target - self.touch(near)) * sgn > 0:
            self.emit(near, target, self.level_size(), DRIFT)
        for side in (0, 1):
            while self.book.n_levels(Side(side)) < self.cfg.depth_min:
                self._deep(side, True)


def generate_stream(cfg: ScenarioConfig) -> tuple[UpdateStream, GroundTruth]:
    """Run the scenario; deterministic for a given config (seed included)."""
    cfg.validate()
    g = _Gen(cfg)
    g.snapshot()
    # action queue: (time, order, kind, spec index)
    actions = []
    for i, s in enumerate(cfg.spoofs):
        actions.append((float(s.start_ms), 0, "place", i))
        actions.append((float(s.start_ms + s.hold_ms), 1, "cancel", i))
    actions.sort()
    ai = 0
    records: list[SpoofRecord] = []
    open_spoofs: dict[int, dict] = {}
    drift: Optional[dict] = None
    next_bg = g.expo(cfg.mean_interval_ms)
    while not g.done:
        t_act = actions[ai][0] if ai < len(actions) else math.inf
        t_drift = drift["next"] if drift else math.inf
        t_next = min(next_bg, t_act, t_drift)
        if t_next > cfg.duration_ms:
            break
        g.t = t_next
        if t_next == t_drift:
            d = drift
            g.drift_step(d["dir"], d["step"])
            d["steps"] += 1
            moved = abs((g.touch(0) + g.touch(1)) - d["mid0"]) // 2
            d["peak"] = max(d["peak"], g.vol.dsigma)
            if moved >= d["ticks"] and d["peak"] >= cfg.drift_target:
                g.anchor = g.touch(0) + g.touch(1)
                drift = None
            elif g.t - d["t0"] > cfg.drift_budget_ms:
                raise GenerationError(f"drift after cancel at {d['t0']:.0f} ms missed its target (peak {d['peak']:.3f}, moved {moved}, sigma {g.vol.sigmas[-1]:.1f})")
            else:
                if d["steps"] % 5 == 0 and d["peak"] < cfg.drift_target:
                    # a still-elevated sigma from an earlier move needs bigger jumps
                    d["step"] = min(64, 2 * d["step"])
                d["next"] = g.t + g.expo(cfg.drift_interval_ms)
        elif t_next == t_act:
            _, _, kind, i = actions[ai]
            ai += 1
            spec = cfg.spoofs[i]
            side = 0 if spec.side == "bid" else 1
            if kind == "place":
                tick, vol = g.place(spec)
                open_spoofs[i] = {"tick": tick, "vol": vol, "ts": int(g.t), "index": len(g.rows) - 1}
            else:
                o = open_spoofs.pop(i)
                g.cancel(side)
                if g.done:
                    break
                records.append(
                    SpoofRecord(
                        side=spec.side,
                        price=from_fixed(o["tick"] * g.tick),
                        volume=from_fixed(o["vol"]),
                        place_ts=o["ts"],
                        cancel_ts=int(g.t),
                        successful=spec.successful,
                        place_index=o["index"],
                        cancel_index=len(g.rows) - 1,
                    )
                )
                if spec.successful:
                    if drift is not None:
                        raise GenerationError("drift windows of two spoofs overlap")
                    drift = {
                        "dir": 1 if side == 0 else -1,
                        "ticks": spec.drift_ticks,
                        "step": 2,
                        "steps": 0,
                        "peak": -math.inf,
                        "t0": g.t,
                        "mid0": g.touch(0) + g.touch(1),
                        "next": g.t + g.expo(cfg.drift_interval_ms),
                    }
        else:
            g.background(drift is not None)
            next_bg = g.t + g.expo(cfg.mean_interval_ms)
    arr = np.array(g.rows, dtype=np.int64)
    stream = UpdateStream(arr[:, 0], arr[:, 1], arr[:, 2].astype(np.int8), arr[:, 3], arr[:, 4])
    truth = GroundTruth(records, np.array(g.prov, dtype=np.int8))
    return stream, truth


def random_stream(n: int, seed: int = 0, levels: int = 400, p_remove: float = 0.3) -> UpdateStream:
    """Unstructured random updates around 100.00 (may cross); for replay tests and benchmarks."""
    rng = np.random.default_rng(seed)
    side = rng.integers(0, 2, n).astype(np.int8)
    off = rng.integers(1, levels, n)
    tick = 10**6  # 0.01
    price = np.where(side == 0, 10_000 - off, 10_000 + off - levels // 4).astype(np.int64) * tick
    size = np.where(rng.random(n) < p_remove, 0, rng.integers(1, 100_000, n)).astype(np.int64) * 10**5
    ts = np.cumsum(rng.integers(0, 60, n)).astype(np.int64)
    return UpdateStream(np.arange(1, n + 1, dtype=np.int64), ts, side, price, size)


# ---------------------------------------------------------------- benchmark suite


@dataclass(frozen=True)
class SampleStyle:
    name: str
    target: float  # positive-window frequency
    interval_ms: float
    cycles: int  # place/cancel cycles per episode
    sides: tuple[str, ...]
    hold_ms: tuple[int, int]
    hard_frac: float  # unsuccessful spoofs per successful one
    drift_ticks: tuple[int, int] = (15, 25)
    distance: tuple[float, float] = (0.001, 0.004)
    volume_mult: tuple[float, float] = (1.2, 2.0)
    cycle_gap_ms: tuple[int, int] = (300, 2500)


SAMPLE_STYLES = (
    # repeated large bid placements, as in a whale walking the price up
    SampleStyle("sample1", 0.011, 30.0, 4, ("bid",), (2600, 6500), 0.25),
    # single ask-side spoofs with many look-alike unsuccessful ones, slower feed
    SampleStyle("sample2", 0.012, 50.0, 1, ("ask",), (2500, 10000), 0.6),
    # short flickering spoofs on both sides, fast feed
    SampleStyle("sample3", 0.048, 20.0, 2, ("bid", "ask"), (1000, 5000), 0.15, cycle_gap_ms=(300, 1500)),
    # mixed sides, medium feed
    SampleStyle("sample4", 0.012, 40.0, 2, ("bid", "ask"), (2500, 8000), 0.3),
)


@dataclass
class BenchmarkSample:
    name: str
    config: ScenarioConfig
    stream: UpdateStream
    truth: GroundTruth
    target: float
    attempts: int
    stats: dict = field(default_factory=dict)


def _schedule(style: SampleStyle, rng: random.Random, n_pos: int, span_ms: float, cfg: ScenarioConfig) -> list[SpoofSpec]:
    groups: list[list[dict]] = []
    remaining = n_pos
    while remaining > 0:
        k = min(style.cycles, remaining)
        side = rng.choice(style.sides)
        groups.append([dict(side=side, ok=True) for _ in range(k)])
        remaining -= k
    for _ in range(int(round(style.hard_frac * n_pos))):
        groups.append([dict(side=rng.choice(style.sides), ok=False)])
    rng.shuffle(groups)
    # draw every cycle's parameters first so the spacing can be fitted
    drawn = []
    busy = 0.0
    for grp in groups:
        cyc = []
        for c in grp:
            hold = rng.randint(*style.hold_ms)
            gap = rng.randint(*style.cycle_gap_ms)
            cyc.append((c, hold, gap))
            busy += hold + cfg.drift_budget_ms + gap
        drawn.append(cyc)
    warmup = 15_000.0
    slack = max(3_000.0 * len(drawn), span_ms - warmup - busy)
    mean_space = slack / len(drawn)
    specs = []
    t = warmup
    for cyc in drawn:
        t += mean_space * (0.5 + rng.random())
        for c, hold, gap in cyc:
            specs.append(
                SpoofSpec(
                    start_ms=int(t),
                    side=c["side"],
                    volume_mult=round(rng.uniform(*style.volume_mult), 3),
                    distance=round(rng.uniform(*style.distance), 5),
                    hold_ms=hold,
                    drift_ticks=rng.randint(*style.drift_ticks) if c["ok"] else 0,
                )
            )
            t += hold + cfg.drift_budget_ms + gap
    return specs


def build_sample(
    style: SampleStyle,
    seed: int,
    total_windows: int = 7500,
    stride: int = 50,
    max_attempts: int = 6,
) -> BenchmarkSample:
    """Generate one sample whose realized positive-window frequency hits ``style.target``.

    The stream is generated with a background-only tail and then cut so the
    number of clean sliding windows gives the target frequency exactly (up to
    rounding). Cutting is a prefix operation, so the config records the cut as
    ``max_updates`` and regenerates the same stream.
    """
    from .features import replay
    from .labeller import Thresholds, flag_spoofing
    from .windows import CROP_MS, LEAD_MS, WINDOW_LEN, negative_starts

    n_pos = int(round(style.target * total_windows))
    n_neg = int(round(n_pos * (1 - style.target) / style.target))
    window_ms = stride * style.interval_ms
    span = 0.8 * total_windows * window_ms
    tail = 0.5 * total_windows * window_ms
    for attempt in range(max_attempts):
        rng = random.Random(f"{seed}:{style.name}:{attempt}")
        base = ScenarioConfig(mean_interval_ms=style.interval_ms, seed=rng.randrange(2**31))
        specs = _schedule(style, rng, n_pos, span, base)
        last = max(s.start_ms + s.hold_ms for s in specs)
        cfg = ScenarioConfig(
            duration_ms=int(last + base.drift_budget_ms + tail),
            mean_interval_ms=style.interval_ms,
            spoofs=specs,
            seed=base.seed,
        )
        try:
            stream, truth = generate_stream(cfg)
        except GenerationError:
            continue
        th = Thresholds(cfg.t1, cfg.t2, cfg.t3, cfg.horizon_ms)
        frames = replay(stream, cfg.vol_window, cfg.vol_lag)
        flags = [f.t0 for f in flag_spoofing(frames, th)]
        if flags != truth.cancel_times():
            continue
        starts = negative_starts(frames.ts, flags, stride, WINDOW_LEN, LEAD_MS)
        # the last flag needs its look-ahead horizon inside the stream
        min_cut = int(np.searchsorted(frames.ts, last + base.drift_budget_ms + cfg.horizon_ms, side="right"))
        if len(starts) < n_neg:
            tail *= 1.5
            continue
        cut = int(starts[n_neg - 1]) + WINDOW_LEN
        if cut < min_cut:
            span *= 0.8
            continue
        cfg.max_updates = cut
        stream = stream[:cut]
        truth = truth.truncate(cut)
        stats = {
            "updates": cut,
            "positives": n_pos,
            "negatives": n_neg,
            "frequency": n_pos / (n_pos + n_neg),
            "spoofs_successful": len(truth.cancel_times()),
            "spoofs_unsuccessful": len(truth.spoofs) - len(truth.cancel_times()),
            "crop_ms": CROP_MS,
        }
        return BenchmarkSample(style.name, cfg, stream, truth, style.target, attempt + 1, stats)
    raise GenerationError(f"{style.name}: no valid stream after {max_attempts} attempts")


def _snapshot_rows(stream: UpdateStream) -> int:
    nz = np.flatnonzero(stream.seq != 0)
    return int(nz[0]) if len(nz) else len(stream)


def make_benchmark_suite(master_seed: int = 0, total_windows: int = 7500, stride: int = 50) -> list[BenchmarkSample]:
    """Four samples differing in spoof style, event length and update rate."""
    return [build_sample(style, master_seed, total_windows, stride) for style in SAMPLE_STYLES]


def write_sample(sample: BenchmarkSample, out_dir) -> None:
    """``stream.ndjson`` + ``truth.json`` + ``scenario.json`` for one sample."""
    from .stream import write_ndjson

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ndjson(sample.stream, out / "stream.ndjson", snapshot_rows=_snapshot_rows(sample.stream))
    (out / "truth.json").write_text(json.dumps(sample.truth.to_json(), separators=(",", ":")) + "\n")
    (out / "scenario.json").write_text(json.dumps(sample.config.to_dict(), indent=2, sort_keys=True) + "\n")
