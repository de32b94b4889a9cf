"""Run configuration: every tunable in one nested dataclass, loaded from JSON.

Unknown keys are rejected at every level. ``RunConfig.to_dict()`` is the
effective configuration echoed into output manifests.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

from .features import DEFAULT_VOL_LAG, DEFAULT_VOL_WINDOW
from .grunet import SearchSpace, TrainConfig
from .labeller import Thresholds
from .orderbook import DEFAULT_DEPTH
from .windows import CROP_MS, DEFAULT_STRIDE, LEAD_MS, SPLIT_RATIOS, WINDOW_LEN


@dataclass(frozen=True)
class FeatureConfig:
    vol_window: int = DEFAULT_VOL_WINDOW
    vol_lag: int = DEFAULT_VOL_LAG
    depth: int = DEFAULT_DEPTH


@dataclass(frozen=True)
class LabelConfig:
    t1: float = 0.25
    t2: float = 0.01
    t3: float = 0.5
    horizon_ms: int = 2000

    def thresholds(self) -> Thresholds:
        return Thresholds(self.t1, self.t2, self.t3, self.horizon_ms)


@dataclass(frozen=True)
class WindowConfig:
    length: int = WINDOW_LEN
    lead_ms: int = LEAD_MS
    crop_ms: int = CROP_MS
    stride: int = DEFAULT_STRIDE
    ratios: tuple[float, float, float] = SPLIT_RATIOS


@dataclass(frozen=True)
class GenerateConfig:
    total_windows: int = 7500  # per sample, positives + negatives


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 0  # 0: use `train` as is
    layers: tuple[int, ...] = SearchSpace.layers
    hidden: tuple[int, ...] = SearchSpace.hidden
    dropout: tuple[float, float] = SearchSpace.dropout
    lr: tuple[float, float] = SearchSpace.lr
    epochs: tuple[int, int] = SearchSpace.epochs

    def space(self) -> SearchSpace:
        return SearchSpace(self.layers, self.hidden, self.dropout, self.lr, self.epochs)


@dataclass(frozen=True)
class EvalConfig:
    seeds: int = 5  # training runs per matrix cell / pooled design
    threshold: float = 0.5


@dataclass(frozen=True)
class SmokeConfig:
    """Overrides applied by ``--smoke``."""

    seeds: int = 1
    epochs: int = 6
    total_windows: int = 2500


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    label: LabelConfig = field(default_factory=LabelConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    smoke: SmokeConfig = field(default_factory=SmokeConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d, "")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)

    def smoked(self) -> "RunConfig":
        """Reduced budget: fewer seeds, fewer epochs, smaller samples."""
        s = self.smoke
        return replace(
            self,
            generate=replace(self.generate, total_windows=s.total_windows),
            train=replace(self.train, epochs=s.epochs),
            eval=replace(self.eval, seeds=s.seeds),
            search=replace(self.search, budget=0),
        )


def _build(cls, d: Any, where: str):
    if not isinstance(d, dict):
        raise ValueError(f"{where or 'config'}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ValueError(f"{where or 'config'}: unknown keys {unknown}")
    defaults = cls()
    kwargs = {}
    for name, value in d.items():
        cur = getattr(defaults, name)
        path = f"{where}.{name}" if where else name
        if is_dataclass(cur):
            kwargs[name] = _build(type(cur), value, path)
        elif isinstance(cur, tuple):
            if not isinstance(value, list):
                raise ValueError(f"{path}: expected a list")
            kwargs[name] = tuple(value)
        elif isinstance(cur, bool) or not isinstance(cur, (int, float)):
            kwargs[name] = value
        elif isinstance(cur, int) and not isinstance(value, int):
            raise ValueError(f"{path}: expected an integer, got {value!r}")
        elif not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValueError(f"{path}: expected a number, got {value!r}")
        else:
            kwargs[name] = type(cur)(value)
    return cls(**kwargs)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return RunConfig.from_dict(data)
