"""Fixed-length labelled windows for early detection.

A positive window for a flag at ``t0`` holds the latest ``length`` frames
with ``ts`` in ``[t0 - lead_ms, t0 - crop_ms]``; the final ``crop_ms`` before
the flag never enter the window. Windows are stored as frame-index arrays over
a per-sample feature matrix and materialized on demand.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import PROJECTION, FrameTable

WINDOW_LEN = 200
LEAD_MS = 12_000
CROP_MS = 2_000
DEFAULT_STRIDE = 50
SPLIT_RATIOS = (0.65, 0.15, 0.20)


@dataclass
class WindowSet:
    features: np.ndarray  # (n_frames, n_features) raw projection
    index: np.ndarray  # (n_windows, length) frame indices
    labels: np.ndarray  # (n_windows,) int8
    t0: np.ndarray  # (n_windows,) int64; -1 for negatives
    source: np.ndarray  # (n_windows,) source ids (str)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowSet(self.features, self.index[idx], self.labels[idx], self.t0[idx], self.source[idx])

    def tensor(self) -> np.ndarray:
        """(n_windows, length, n_features) float64, rounded through float32 like the archive."""
        return self.features[self.index].astype(np.float32).astype(np.float64)

    @classmethod
    def empty(cls, features: np.ndarray, length: int = WINDOW_LEN) -> "WindowSet":
        return cls(
            features,
            np.zeros((0, length), np.int64),
            np.zeros(0, np.int8),
            np.zeros(0, np.int64),
            np.zeros(0, dtype=object),
        )


def concat(sets: Sequence[WindowSet]) -> WindowSet:
    """Join window sets that may reference different feature matrices."""
    feats, idx, offset = [], [], 0
    seen: dict[int, int] = {}
    for ws in sets:
        key = id(ws.features)
        if key not in seen:
            seen[key] = offset
            feats.append(ws.features)
            offset += len(ws.features)
        idx.append(ws.index + seen[key])
    return WindowSet(
        np.concatenate(feats) if feats else np.zeros((0, len(PROJECTION))),
        np.concatenate(idx),
        np.concatenate([s.labels for s in sets]),
        np.concatenate([s.t0 for s in sets]),
        np.concatenate([s.source for s in sets]),
    )


@dataclass(frozen=True)
class PositiveBuild:
    index: np.ndarray
    t0: np.ndarray
    dropped: int


def build_positive_windows(
    ts: np.ndarray,
    flag_t0: Sequence[int],
    length: int = WINDOW_LEN,
    lead_ms: int = LEAD_MS,
    crop_ms: int = CROP_MS,
) -> PositiveBuild:
    """Frame-index windows for each flag time; flags with no in-range frame are dropped."""
    ts = np.asarray(ts, dtype=np.int64)
    t0s = np.asarray(flag_t0, dtype=np.int64)
    lo = np.searchsorted(ts, t0s - lead_ms, side="left")
    hi = np.searchsorted(ts, t0s - crop_ms, side="right")
    rows, kept = [], []
    for a, b, t in zip(lo.tolist(), hi.tolist(), t0s.tolist()):
        if b <= a:
            continue
        start = max(a, b - length)
        real = np.arange(start, b, dtype=np.int64)
        pad = np.full(length - len(real), start, dtype=np.int64)
        rows.append(np.concatenate([pad, real]))
        kept.append(t)
    index = np.array(rows, dtype=np.int64).reshape(-1, length)
    return PositiveBuild(index, np.array(kept, dtype=np.int64), len(t0s) - len(kept))


def negative_starts(
    ts: np.ndarray,
    flag_t0: Sequence[int],
    stride: int = DEFAULT_STRIDE,
    length: int = WINDOW_LEN,
    lead_ms: int = LEAD_MS,
) -> np.ndarray:
    """Start indices of sliding windows that stay clear of every flag.

    A window is rejected if any flag lies in ``[first_ts, last_ts + lead_ms]``,
    i.e. the flag's episode ``[t0 - lead_ms, t0]`` overlaps the window or the
    flag follows within ``lead_ms``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ts = np.asarray(ts, dtype=np.int64)
    n = len(ts)
    if n < length:
        return np.zeros(0, dtype=np.int64)
    starts = np.arange(0, n - length + 1, stride, dtype=np.int64)
    t0s = np.sort(np.asarray(flag_t0, dtype=np.int64))
    first = ts[starts]
    last = ts[starts + length - 1]
    hits = np.searchsorted(t0s, last + lead_ms, side="right") - np.searchsorted(t0s, first, side="left")
    return starts[hits == 0]


def build_negative_windows(
    ts: np.ndarray,
    flag_t0: Sequence[int],
    stride: int = DEFAULT_STRIDE,
    length: int = WINDOW_LEN,
    lead_ms: int = LEAD_MS,
) -> np.ndarray:
    starts = negative_starts(ts, flag_t0, stride, length, lead_ms)
    return starts[:, None] + np.arange(length, dtype=np.int64)[None, :]


def build_windows(
    frames: FrameTable,
    flag_t0: Sequence[int],
    source_id: str = "sample",
    stride: int = DEFAULT_STRIDE,
    length: int = WINDOW_LEN,
    lead_ms: int = LEAD_MS,
    crop_ms: int = CROP_MS,
) -> tuple[WindowSet, int]:
    """Positives then negatives for one stream; returns (windows, dropped flag count)."""
    feats = frames.projection()
    pos = build_positive_windows(frames.ts, flag_t0, length, lead_ms, crop_ms)
    neg = build_negative_windows(frames.ts, flag_t0, stride, length, lead_ms)
    n_p, n_n = len(pos.index), len(neg)
    ws = WindowSet(
        feats,
        np.concatenate([pos.index, neg]).reshape(-1, length),
        np.concatenate([np.ones(n_p, np.int8), np.zeros(n_n, np.int8)]),
        np.concatenate([pos.t0, np.full(n_n, -1, np.int64)]),
        np.full(n_p + n_n, source_id, dtype=object),
    )
    return ws, pos.dropped


@dataclass
class DatasetSplit:
    train: WindowSet
    val: WindowSet
    test: WindowSet
    seed: int
    ratios: tuple[float, float, float] = SPLIT_RATIOS

    def counts(self) -> dict:
        return {
            name: {"pos": getattr(self, name).n_pos, "total": len(getattr(self, name))}
            for name in ("train", "val", "test")
        }


def _three_way(n: int, ratios) -> tuple[int, int, int]:
    a = int(round(ratios[0] * n))
    b = int(round(ratios[1] * n))
    return a, b, n - a - b


def split_dataset(ws: WindowSet, seed: int, ratios=SPLIT_RATIOS) -> DatasetSplit:
    """Seeded stratified split.

    Split totals are rounded from the ratios; positives are apportioned the
    same way and negatives fill the remainder, so each split keeps the class
    frequency within one window.
    """
    n = len(ws)
    totals = _three_way(n, ratios)
    if min(totals) < 1:
        raise ValueError(f"{n} windows cannot fill three splits")
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(ws.labels == 1)
    neg = np.flatnonzero(ws.labels == 0)
    pos = pos[rng.permutation(len(pos))]
    neg = neg[rng.permutation(len(neg))]
    p_counts = _three_way(len(pos), ratios)
    n_counts = [t - p for t, p in zip(totals, p_counts)]
    if min(n_counts) < 0:
        # only possible when nearly all windows are positive
        n_counts = list(_three_way(len(neg), ratios))
    parts = []
    pa = pb = 0
    for pc, nc in zip(p_counts, n_counts):
        idx = np.concatenate([pos[pa : pa + pc], neg[pb : pb + nc]])
        parts.append(ws.subset(np.sort(idx)))
        pa += pc
        pb += nc
    return DatasetSplit(parts[0], parts[1], parts[2], seed, tuple(ratios))


def downsample_training(split: DatasetSplit, seed: Optional[int] = None) -> DatasetSplit:
    """Drop training negatives at random until classes are 1:1; val/test untouched."""
    tr = split.train
    pos = np.flatnonzero(tr.labels == 1)
    neg = np.flatnonzero(tr.labels == 0)
    if len(pos) == 0:
        raise ValueError(f"training split has no positive windows ({len(tr)} windows)")
    rng = np.random.default_rng(split.seed if seed is None else seed)
    if len(neg) > len(pos):
        neg = np.sort(rng.choice(neg, size=len(pos), replace=False))
    keep = np.sort(np.concatenate([pos, neg]))
    return DatasetSplit(tr.subset(keep), split.val, split.test, split.seed, split.ratios)


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "NormStats":
        flat = x.reshape(-1, x.shape[-1])
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    @classmethod
    def identity(cls, n_features: int) -> "NormStats":
        return cls(np.zeros(n_features), np.ones(n_features))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


# ---------------------------------------------------------------- archive IO


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_archive(split: DatasetSplit, out_dir, extra: Optional[dict] = None) -> dict:
    """Write X/y/t0 arrays per split plus manifest.json; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    norm = NormStats.fit(split.train.tensor())
    files = {}
    for name in ("train", "val", "test"):
        ws = getattr(split, name)
        arrays = {
            f"{name}_X.npy": ws.features[ws.index].astype(np.float32),
            f"{name}_y.npy": ws.labels.astype(np.int8),
            f"{name}_t0.npy": ws.t0.astype(np.int64),
        }
        for fname, arr in arrays.items():
            p = out / fname
            with open(p, "wb") as fh:
                np.save(fh, arr, allow_pickle=False)
            files[fname] = _sha(p)
    manifest = {
        "format": "lobspoof-dataset/1",
        "features": list(PROJECTION),
        "seed": split.seed,
        "ratios": list(split.ratios),
        "counts": split.counts(),
        "normalization": norm.to_dict(),
        "files": files,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass
class ArchiveSplit:
    X: np.ndarray
    y: np.ndarray
    t0: np.ndarray


@dataclass
class Archive:
    train: ArchiveSplit
    val: ArchiveSplit
    test: ArchiveSplit
    manifest: dict = field(default_factory=dict)

    @property
    def norm(self) -> NormStats:
        return NormStats.from_dict(self.manifest["normalization"])


def load_archive(path) -> Archive:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    parts = {}
    for name in ("train", "val", "test"):
        X = np.load(root / f"{name}_X.npy").astype(np.float64)
        y = np.load(root / f"{name}_y.npy").astype(np.int8)
        t0 = np.load(root / f"{name}_t0.npy")
        parts[name] = ArchiveSplit(X, y, t0)
    return Archive(parts["train"], parts["val"], parts["test"], manifest)


def as_archive_split(ws: WindowSet) -> ArchiveSplit:
    return ArchiveSplit(ws.tensor(), ws.labels.astype(np.int8), ws.t0.copy())
