"""Experiment designs over the benchmark samples and their reports.

Two designs are supported:

* cross-sample matrix: train on one sample (several seeds), test on every
  sample; cells hold the mean weighted accuracy over seeds.
* pooled: train on the concatenated train/val splits of all samples, test on
  each sample separately; report FP rate, FN rate and accuracy per sample.

"Accuracy" in both tables is the weighted (balanced) accuracy; raw accuracy
is carried alongside in the JSON output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .grunet import GruModel, TrainConfig, TrainingDiverged, save_checkpoint, train
from .metrics import Metrics, confusion
from .windows import ArchiveSplit


@dataclass
class SampleSplits:
    name: str
    train: ArchiveSplit
    val: ArchiveSplit
    test: ArchiveSplit
    norm: Optional[tuple[np.ndarray, np.ndarray]] = None


def evaluate(model: GruModel, X: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> Metrics:
    """Confusion counts of ``model`` on raw windows; rates are None when a class is absent."""
    if len(y) == 0:
        raise ValueError("no windows to evaluate")
    return confusion(model.predict_proba(X), y, threshold)


def _mean(xs: Sequence[Optional[float]]) -> Optional[float]:
    vals = [x for x in xs if x is not None]
    return sum(vals) / len(vals) if vals else None


def _concat(parts: Sequence[ArchiveSplit]) -> ArchiveSplit:
    return ArchiveSplit(
        np.concatenate([p.X for p in parts]),
        np.concatenate([p.y for p in parts]),
        np.concatenate([p.t0 for p in parts]),
    )


@dataclass
class RunRecord:
    """One training run: which data it saw, its seed, and test metrics per sample."""

    train_on: str
    seed: int
    status: str = "ok"  # ok | failed
    error: Optional[str] = None
    best_epoch: int = -1
    metrics: dict[str, Metrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "train_on": self.train_on,
            "seed": self.seed,
            "status": self.status,
            "error": self.error,
            "best_epoch": self.best_epoch,
            "metrics": {k: m.to_dict() for k, m in self.metrics.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            d["train_on"],
            int(d["seed"]),
            d["status"],
            d.get("error"),
            int(d.get("best_epoch", -1)),
            {k: Metrics.from_dict(m) for k, m in d["metrics"].items()},
        )


def _run(
    train_on: str,
    tr: ArchiveSplit,
    va: ArchiveSplit,
    tests: Sequence[SampleSplits],
    cfg: TrainConfig,
    checkpoint: Optional[Path],
) -> RunRecord:
    rec = RunRecord(train_on, cfg.seed)
    try:
        res = train(tr.X, tr.y, va.X, va.y, cfg)
    except (TrainingDiverged, ValueError) as exc:
        rec.status, rec.error = "failed", f"{type(exc).__name__}: {exc}"
        return rec
    rec.best_epoch = res.best_epoch
    for s in tests:
        rec.metrics[s.name] = evaluate(res.model, s.test.X, s.test.y, cfg.threshold)
    if checkpoint is not None:
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(res.model, checkpoint, cfg, {"train_on": train_on})
    return rec


def run_seeds(base_seed: int, n: int) -> list[int]:
    return [base_seed * 1000 + k for k in range(n)]


# ---------------------------------------------------------------- cross-sample matrix


@dataclass
class MatrixResult:
    names: list[str]
    runs: list[RunRecord]

    def cell_runs(self, train_on: str) -> list[RunRecord]:
        return [r for r in self.runs if r.train_on == train_on and r.status == "ok"]

    def cell(self, train_on: str, test_on: str) -> Optional[float]:
        """Mean weighted accuracy over successful seeds; None if all failed."""
        return _mean([r.metrics[test_on].weighted_accuracy for r in self.cell_runs(train_on)])

    def table(self) -> list[list[Optional[float]]]:
        return [[self.cell(a, b) for b in self.names] for a in self.names]

    def row_averages(self) -> list[Optional[float]]:
        return [_mean(row) for row in self.table()]

    def column_averages(self) -> list[Optional[float]]:
        t = self.table()
        return [_mean([t[i][j] for i in range(len(t))]) for j in range(len(self.names))]

    def overall(self) -> Optional[float]:
        return _mean([c for row in self.table() for c in row])

    def to_dict(self) -> dict:
        return {
            "design": "cross_sample",
            "names": self.names,
            "table": self.table(),
            "row_average": self.row_averages(),
            "column_average": self.column_averages(),
            "overall": self.overall(),
            "runs": [r.to_dict() for r in self.runs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixResult":
        """Rebuild from persisted runs; the table is recomputed, not read back."""
        return cls(list(d["names"]), [RunRecord.from_dict(r) for r in d["runs"]])


def cross_sample_matrix(
    samples: Sequence[SampleSplits],
    cfg: TrainConfig,
    seeds: Sequence[int],
    checkpoint_dir: Optional[Path] = None,
    progress: Optional[Callable[[RunRecord], None]] = None,
) -> MatrixResult:
    """Train on each sample with every seed and test on all samples."""
    runs = []
    for s in samples:
        for seed in seeds:
            ck = None if checkpoint_dir is None else Path(checkpoint_dir) / f"{s.name}_seed{seed}.ckpt"
            rec = _run(s.name, s.train, s.val, samples, replace(cfg, seed=seed), ck)
            runs.append(rec)
            if progress:
                progress(rec)
    return MatrixResult([s.name for s in samples], runs)


# ---------------------------------------------------------------- pooled training

POOLED = "pooled"


@dataclass
class PooledResult:
    names: list[str]
    runs: list[RunRecord]
    train_size: int = 0

    def _avg(self, name: str, attr: str) -> Optional[float]:
        return _mean([getattr(r.metrics[name], attr) for r in self.runs if r.status == "ok"])

    def rows(self) -> dict[str, list[Optional[float]]]:
        """FP rate, FN rate and weighted accuracy per sample, seed-averaged, plus raw accuracy."""
        out = {}
        for label, attr in (("FP", "fp_rate"), ("FN", "fn_rate"), ("Accuracy", "weighted_accuracy"), ("Raw accuracy", "accuracy")):
            vals = [self._avg(n, attr) for n in self.names]
            out[label] = vals + [_mean(vals)]
        return out

    def mean_weighted_accuracy(self) -> Optional[float]:
        return self.rows()["Accuracy"][-1]

    def to_dict(self) -> dict:
        return {
            "design": "pooled",
            "names": self.names,
            "train_size": self.train_size,
            "rows": self.rows(),
            "runs": [r.to_dict() for r in self.runs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PooledResult":
        return cls(list(d["names"]), [RunRecord.from_dict(r) for r in d["runs"]], int(d.get("train_size", 0)))


def pooled_splits(samples: Sequence[SampleSplits]) -> tuple[ArchiveSplit, ArchiveSplit]:
    return _concat([s.train for s in samples]), _concat([s.val for s in samples])


def pooled_eval(
    samples: Sequence[SampleSplits],
    cfg: TrainConfig,
    seeds: Sequence[int],
    checkpoint_dir: Optional[Path] = None,
    progress: Optional[Callable[[RunRecord], None]] = None,
) -> PooledResult:
    """Train on all train splits together (validated on all val splits), test per sample."""
    tr, va = pooled_splits(samples)
    runs = []
    for seed in seeds:
        ck = None if checkpoint_dir is None else Path(checkpoint_dir) / f"{POOLED}_seed{seed}.ckpt"
        rec = _run(POOLED, tr, va, samples, replace(cfg, seed=seed), ck)
        runs.append(rec)
        if progress:
            progress(rec)
    return PooledResult([s.name for s in samples], runs, len(tr.y))


# ---------------------------------------------------------------- rendering


def _fmt(x: Optional[float]) -> str:
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.2f}"


def _grid_text(header: list[str], rows: list[list[str]]) -> str:
    cols = list(zip(header, *rows))
    widths = [max(len(c) for c in col) for col in cols]
    line = lambda cells: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    rule = "-" * len(line(header))
    return "\n".join([line(header), rule, *[line(r) for r in rows]]) + "\n"


def matrix_rows(res: MatrixResult) -> tuple[list[str], list[list[str]]]:
    header = ["train \\ test", *res.names, "Average"]
    rows = []
    for name, row, avg in zip(res.names, res.table(), res.row_averages()):
        rows.append([name, *[_fmt(c) for c in row], _fmt(avg)])
    rows.append(["Average", *[_fmt(c) for c in res.column_averages()], _fmt(res.overall())])
    return header, rows


def pooled_rows(res: PooledResult) -> tuple[list[str], list[list[str]]]:
    header = ["", *res.names, "Average"]
    rows = [[label, *[_fmt(v) for v in vals]] for label, vals in res.rows().items()]
    return header, rows


def render_text(res) -> str:
    header, rows = matrix_rows(res) if isinstance(res, MatrixResult) else pooled_rows(res)
    return _grid_text(header, rows)


def render_csv(res) -> str:
    header, rows = matrix_rows(res) if isinstance(res, MatrixResult) else pooled_rows(res)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_report(res, out_dir, stem: str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / f"{stem}.json",
        "txt": out / f"{stem}.txt",
        "csv": out / f"{stem}.csv",
    }
    paths["json"].write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["txt"].write_text(render_text(res))
    paths["csv"].write_text(render_csv(res))
    return paths


# ---------------------------------------------------------------- plots


def plot_flags(frames, flags, out_dir, span_ms: int = 15_000) -> list[Path]:
    """One SVG per flag: mid price, volatility variation and delta volume around t0."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "lobspoof"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ts = frames.ts
    mid = (frames.best_bid + frames.best_ask) / 2.0
    paths = []
    for k, f in enumerate(flags):
        a = int(np.searchsorted(ts, f.t0 - span_ms, side="left"))
        b = int(np.searchsorted(ts, f.t0 + span_ms, side="right"))
        t = (ts[a:b] - f.t0) / 1000.0
        fig, axes = plt.subplots(3, 1, figsize=(8, 7), sharex=True)
        axes[0].plot(t, mid[a:b], lw=0.8)
        axes[0].set_ylabel("mid")
        axes[1].plot(t, frames.vol_variation[a:b], lw=0.8, color="tab:orange")
        axes[1].set_ylabel("vol. variation")
        axes[2].plot(t, frames.delta_volume[a:b], lw=0.6, color="tab:green")
        axes[2].set_ylabel("delta volume")
        axes[2].set_xlabel("seconds from cancel")
        for ax in axes:
            ax.axvline(0.0, color="k", lw=0.6, ls="--")
            ax.axvspan(-2.0, 0.0, color="0.85", lw=0)
        axes[0].set_title(f"{f.side.label} cancel at {f.t0} ms, {f.cancelled_volume:g} @ {f.price:g}")
        fig.tight_layout()
        p = out / f"flag_{k:04d}_{f.t0}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths
