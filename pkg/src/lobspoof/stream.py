"""Columnar update streams and their NDJSON / CSV encodings.

One NDJSON object per line::

    {"seq": 12, "ts": 1583712000123, "side": "bid", "price": "100.25", "size": "3.5"}

A stream may start with a snapshot boot record at seq 0::

    {"seq": 0, "ts": ..., "type": "snapshot", "bids": [["100.0", "2"]], "asks": [...]}

which is expanded into one level update per listed level (all with seq 0).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .orderbook import L2Update, Side, from_fixed, to_fixed


class StreamFormatError(ValueError):
    """Malformed input record; carries the 1-based line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class UpdateStream:
    """Struct-of-arrays view of an update sequence."""

    seq: np.ndarray  # int64
    ts: np.ndarray  # int64 ms
    side: np.ndarray  # int8, 0 bid / 1 ask
    price: np.ndarray  # int64 fixed-point
    size: np.ndarray  # int64 fixed-point

    def __len__(self) -> int:
        return len(self.ts)

    @classmethod
    def empty(cls) -> "UpdateStream":
        return cls(*(np.zeros(0, dtype=t) for t in (np.int64, np.int64, np.int8, np.int64, np.int64)))

    @classmethod
    def from_updates(cls, updates: Iterable[L2Update]) -> "UpdateStream":
        ups = list(updates)
        return cls(
            np.fromiter((u.seq for u in ups), np.int64, len(ups)),
            np.fromiter((u.ts for u in ups), np.int64, len(ups)),
            np.fromiter((int(u.side) for u in ups), np.int8, len(ups)),
            np.fromiter((u.price for u in ups), np.int64, len(ups)),
            np.fromiter((u.size for u in ups), np.int64, len(ups)),
        )

    def updates(self) -> Iterator[L2Update]:
        for q, t, s, p, z in zip(
            self.seq.tolist(), self.ts.tolist(), self.side.tolist(), self.price.tolist(), self.size.tolist()
        ):
            yield L2Update(q, t, Side(s), p, z)

    def __getitem__(self, sl) -> "UpdateStream":
        if not isinstance(sl, slice):
            raise TypeError("UpdateStream supports slicing only")
        return UpdateStream(self.seq[sl], self.ts[sl], self.side[sl], self.price[sl], self.size[sl])

    def validate(self) -> None:
        """Check the stream invariants; raise ValueError on the first breach."""
        if len(self) == 0:
            return
        if np.any(self.price <= 0):
            raise ValueError(f"non-positive price at index {int(np.argmax(self.price <= 0))}")
        if np.any(self.size < 0):
            raise ValueError(f"negative size at index {int(np.argmax(self.size < 0))}")
        if np.any(np.diff(self.ts) < 0):
            raise ValueError(f"timestamp decreases at index {int(np.argmax(np.diff(self.ts) < 0)) + 1}")
        # snapshot rows share seq 0; everything after must strictly increase
        body = self.seq[self.seq != 0] if self.seq[0] == 0 else self.seq
        if np.any(np.diff(body) <= 0):
            raise ValueError("sequence numbers must strictly increase")

    def equals(self, other: "UpdateStream") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("seq", "ts", "side", "price", "size")
        )


def _record_to_rows(obj: dict, lineno: int) -> list[tuple]:
    if obj.get("type") == "snapshot":
        seq, ts = int(obj["seq"]), int(obj["ts"])
        if seq != 0:
            raise StreamFormatError(lineno, "snapshot record only allowed at seq 0")
        rows = []
        for side, key in ((0, "bids"), (1, "asks")):
            for p, s in obj.get(key, []):
                rows.append((0, ts, side, to_fixed(p), to_fixed(s)))
        return rows
    missing = {"seq", "ts", "side", "price", "size"} - obj.keys()
    if missing:
        raise StreamFormatError(lineno, f"missing fields {sorted(missing)}")
    if not isinstance(obj["price"], str) or not isinstance(obj["size"], str):
        raise StreamFormatError(lineno, "price and size must be decimal strings")
    side = Side.parse(obj["side"])
    price, size = to_fixed(obj["price"]), to_fixed(obj["size"])
    if price <= 0 or size < 0:
        raise StreamFormatError(lineno, "price must be > 0 and size >= 0")
    return [(int(obj["seq"]), int(obj["ts"]), int(side), price, size)]


def _rows_to_stream(rows: list[tuple]) -> UpdateStream:
    if not rows:
        return UpdateStream.empty()
    arr = np.array(rows, dtype=np.int64)
    return UpdateStream(arr[:, 0], arr[:, 1], arr[:, 2].astype(np.int8), arr[:, 3], arr[:, 4])


def read_ndjson(path) -> UpdateStream:
    rows: list[tuple] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StreamFormatError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise StreamFormatError(lineno, "expected a JSON object")
            try:
                rows.extend(_record_to_rows(obj, lineno))
            except StreamFormatError:
                raise
            except (ValueError, TypeError, KeyError) as exc:
                raise StreamFormatError(lineno, str(exc)) from None
    stream = _rows_to_stream(rows)
    try:
        stream.validate()
    except ValueError as exc:
        raise StreamFormatError(0, str(exc)) from None
    return stream


def write_ndjson(stream: UpdateStream, path, snapshot_rows: int = 0) -> None:
    """Write ``stream``; the first ``snapshot_rows`` rows go out as one snapshot record."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        start = 0
        if snapshot_rows:
            head = stream[:snapshot_rows]
            rec = {
                "seq": 0,
                "ts": int(head.ts[0]),
                "type": "snapshot",
                "bids": [[from_fixed(p), from_fixed(s)] for sd, p, s in zip(head.side, head.price.tolist(), head.size.tolist()) if sd == 0],
                "asks": [[from_fixed(p), from_fixed(s)] for sd, p, s in zip(head.side, head.price.tolist(), head.size.tolist()) if sd == 1],
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
            start = snapshot_rows
        for q, t, s, p, z in zip(
            stream.seq[start:].tolist(),
            stream.ts[start:].tolist(),
            stream.side[start:].tolist(),
            stream.price[start:].tolist(),
            stream.size[start:].tolist(),
        ):
            fh.write(
                '{"seq":%d,"ts":%d,"side":"%s","price":"%s","size":"%s"}\n'
                % (q, t, "bid" if s == 0 else "ask", from_fixed(p), from_fixed(z))
            )


CSV_COLUMNS = ("seq", "ts", "side", "price", "size")


def read_csv(path) -> UpdateStream:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(CSV_COLUMNS) - set(reader.fieldnames):
            raise StreamFormatError(1, f"CSV header must contain {CSV_COLUMNS}")
        for lineno, rec in enumerate(reader, 2):
            try:
                rows.extend(_record_to_rows(rec, lineno))
            except StreamFormatError:
                raise
            except (ValueError, TypeError) as exc:
                raise StreamFormatError(lineno, str(exc)) from None
    stream = _rows_to_stream(rows)
    stream.validate()
    return stream


def write_csv(stream: UpdateStream, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for u in stream.updates():
            w.writerow([u.seq, u.ts, u.side.label, from_fixed(u.price), from_fixed(u.size)])


def read_stream(path) -> UpdateStream:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    return read_ndjson(path)
