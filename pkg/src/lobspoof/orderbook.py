"""Incremental L2 order book over fixed-point prices and sizes.

Prices and sizes are stored as integers scaled by ``SCALE`` (8 decimal
places). Updates carry the absolute size of a level after the change; a size
of zero deletes the level.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import IntEnum
from typing import Optional

SCALE = 10**8
SCALE_DIGITS = 8
DEFAULT_DEPTH = 25


class Side(IntEnum):
    BID = 0
    ASK = 1

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, Side):
            return value
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("bid", "b", "buy"):
                return cls.BID
            if v in ("ask", "a", "sell", "offer"):
                return cls.ASK
            raise ValueError(f"unknown side {value!r}")
        return cls(int(value))

    @property
    def label(self) -> str:
        return "bid" if self is Side.BID else "ask"


def to_fixed(value) -> int:
    """Parse a decimal string (or int/Decimal) into scaled integer units.

    Floats are rejected on purpose; they are the source of replay drift.
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"fixed-point values must be str/int/Decimal, got {type(value).__name__}")
    if isinstance(value, int):
        return value * SCALE
    try:
        d = Decimal(value) if not isinstance(value, Decimal) else value
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal: {value!r}") from exc
    if not d.is_finite():
        raise ValueError(f"not a finite decimal: {value!r}")
    scaled = d.scaleb(SCALE_DIGITS)
    if scaled != scaled.to_integral_value():
        raise ValueError(f"{value!r} has more than {SCALE_DIGITS} fractional digits")
    return int(scaled)


def from_fixed(units: int) -> str:
    """Render scaled integer units as a canonical decimal string."""
    d = Decimal(units).scaleb(-SCALE_DIGITS).normalize()
    s = format(d, "f")
    return s


@dataclass(frozen=True, slots=True)
class L2Update:
    seq: int
    ts: int
    side: Side
    price: int
    size: int

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError(f"price must be positive (seq={self.seq})")
        if self.size < 0:
            raise ValueError(f"size must be non-negative (seq={self.seq})")

    @classmethod
    def make(cls, seq: int, ts: int, side, price, size) -> "L2Update":
        return cls(seq, ts, Side.parse(side), to_fixed(price), to_fixed(size))


class EffectKind(IntEnum):
    ADDED = 0
    INCREASED = 1
    DECREASED = 2
    REMOVED = 3
    # same size re-sent, or size 0 sent for a level that does not exist
    UNCHANGED = 4


@dataclass(frozen=True, slots=True)
class UpdateEffect:
    kind: EffectKind
    delta_volume: int
    cancelled_volume: int


def classify(old: int, new: int) -> UpdateEffect:
    if old == 0 and new > 0:
        kind = EffectKind.ADDED
    elif new == 0 and old > 0:
        kind = EffectKind.REMOVED
    elif new > old:
        kind = EffectKind.INCREASED
    elif new < old:
        kind = EffectKind.DECREASED
    else:
        kind = EffectKind.UNCHANGED
    return UpdateEffect(kind, new - old, max(0, old - new))


@dataclass
class BookAnomalies:
    noop_removals: int = 0
    crossed: int = 0


class OrderBook:
    """L2 book keeping every level; depth limits apply only to queries.

    Each side keeps a dict ``price -> size`` plus a sorted list of keys in
    best-first order (bid keys are negated so both lists ascend).
    """

    __slots__ = ("_levels", "_keys", "anomalies")

    def __init__(self) -> None:
        self._levels: tuple[dict[int, int], dict[int, int]] = ({}, {})
        self._keys: tuple[list[int], list[int]] = ([], [])
        self.anomalies = BookAnomalies()

    @property
    def bids(self) -> dict[int, int]:
        """Bid levels, descending price."""
        lv = self._levels[Side.BID]
        return {-k: lv[-k] for k in self._keys[Side.BID]}

    @property
    def asks(self) -> dict[int, int]:
        """Ask levels, ascending price."""
        lv = self._levels[Side.ASK]
        return {k: lv[k] for k in self._keys[Side.ASK]}

    def size_at(self, side: Side, price: int) -> int:
        return self._levels[side].get(price, 0)

    def levels(self, side: Side, depth: Optional[int] = None) -> list[tuple[int, int]]:
        """Best-first (price, size) pairs, optionally limited to ``depth``."""
        keys = self._keys[side] if depth is None else self._keys[side][:depth]
        lv = self._levels[side]
        if side is Side.BID:
            return [(-k, lv[-k]) for k in keys]
        return [(k, lv[k]) for k in keys]

    def n_levels(self, side: Side) -> int:
        return len(self._keys[side])

    def price_at_rank(self, side: Side, rank: int) -> int:
        """Price of the ``rank``-th best level (0 = touch; negative ranks count from the worst)."""
        k = self._keys[side][rank]
        return -k if side == Side.BID else k

    def apply(self, u: L2Update) -> UpdateEffect:
        old = self.apply_raw(u.side, u.price, u.size)
        return classify(old, u.size)

    def apply_raw(self, side: int, price: int, new: int) -> int:
        """Set one level from plain ints; returns the previous size."""
        lv = self._levels[side]
        keys = self._keys[side]
        key = -price if side == 0 else price
        old = lv.get(price, 0)
        if new > 0:
            if old == 0:
                bisect.insort(keys, key)
            lv[price] = new
        elif old > 0:
            del lv[price]
            del keys[bisect.bisect_left(keys, key)]
        else:
            self.anomalies.noop_removals += 1
        bk, ak = self._keys
        if bk and ak and -bk[0] >= ak[0]:
            self.anomalies.crossed += 1
        return old

    def best(self, side: Side) -> Optional[int]:
        keys = self._keys[side]
        if not keys:
            return None
        return -keys[0] if side == Side.BID else keys[0]

    def top_of_book(self) -> tuple[Optional[int], Optional[int]]:
        return self.best(Side.BID), self.best(Side.ASK)

    def mid_price(self) -> Optional[float]:
        """Mid in float price units (not scaled)."""
        bb, ba = self.top_of_book()
        if bb is None or ba is None:
            return None
        return (bb + ba) / (2 * SCALE)

    def cumulative_volume(self, side: Side, depth: int = DEFAULT_DEPTH) -> int:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        lv = self._levels[side]
        keys = self._keys[side]
        if side == Side.BID:
            return sum(lv[-k] for k in keys[:depth])
        return sum(lv[k] for k in keys[:depth])

    def copy(self) -> "OrderBook":
        other = OrderBook()
        other._levels = (dict(self._levels[0]), dict(self._levels[1]))
        other._keys = (list(self._keys[0]), list(self._keys[1]))
        other.anomalies = BookAnomalies(self.anomalies.noop_removals, self.anomalies.crossed)
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, OrderBook):
            return NotImplemented
        return self._levels == other._levels

    def __repr__(self) -> str:
        return f"OrderBook(bids={len(self._keys[0])} levels, asks={len(self._keys[1])} levels)"


def apply_update(book: OrderBook, u: L2Update) -> tuple[OrderBook, UpdateEffect]:
    """Functional-style wrapper: mutates ``book`` in place and returns it."""
    effect = book.apply(u)
    return book, effect


def top_of_book(book: OrderBook) -> tuple[Optional[int], Optional[int]]:
    return book.top_of_book()


def mid_price(book: OrderBook) -> Optional[float]:
    return book.mid_price()


def cumulative_volume(book: OrderBook, side: Side, depth: int = DEFAULT_DEPTH) -> int:
    return book.cumulative_volume(side, depth)
