"""Confusion counts and the rates derived from them."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float = 0.5

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> Optional[float]:
        return _ratio(self.tp + self.tn, self.n)

    @property
    def tpr(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def tnr(self) -> Optional[float]:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def fp_rate(self) -> Optional[float]:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def fn_rate(self) -> Optional[float]:
        return _ratio(self.fn, self.fn + self.tp)

    @property
    def weighted_accuracy(self) -> Optional[float]:
        """Mean of the per-class recalls; None unless both classes are present."""
        a, b = self.tpr, self.tnr
        if a is None or b is None:
            return None
        return (a + b) / 2

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("accuracy", "weighted_accuracy", "fp_rate", "fn_rate"):
            d[k] = getattr(self, k)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(int(d["tp"]), int(d["fp"]), int(d["tn"]), int(d["fn"]), float(d.get("threshold", 0.5)))


def confusion(prob: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> Metrics:
    """Predict positive when ``prob >= threshold``."""
    prob = np.asarray(prob, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    if prob.shape != y.shape:
        raise ValueError(f"shape mismatch {prob.shape} vs {y.shape}")
    pred = prob >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    return Metrics(tp, fp, tn, fn, float(threshold))
