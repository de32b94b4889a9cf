"""Command-line entry point: ``lobspoof <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .evaluation import (
    MatrixResult,
    PooledResult,
    SampleSplits,
    cross_sample_matrix,
    evaluate,
    plot_flags,
    pooled_eval,
    run_seeds,
    write_report,
)
from .features import replay, write_frames_csv
from .grunet import TrainConfig, TrainingDiverged, load_checkpoint, random_search, save_checkpoint, train
from .labeller import flag_spoofing, read_flags, write_flags
from .stream import StreamFormatError, read_stream
from .synthgen import GenerationError, SAMPLE_STYLES, build_sample, write_sample
from .windows import ArchiveSplit, build_windows, downsample_training, load_archive, save_archive, split_dataset

log = logging.getLogger("lobspoof")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def _write_manifest(out: Path, command: str, cfg: RunConfig, body: dict) -> dict:
    manifest = {"command": command, "version": __version__, "config": cfg.to_dict(), "config_sha256": _config_hash(cfg), **body}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- pipeline steps


def label_stream(stream_path: Path, cfg: RunConfig):
    stream = read_stream(stream_path)
    f = cfg.features
    frames = replay(stream, f.vol_window, f.vol_lag, f.depth)
    flags = flag_spoofing(frames, cfg.label.thresholds())
    return frames, flags


def dataset_from(frames, flags, cfg: RunConfig, source: str):
    w = cfg.windows
    ws, dropped = build_windows(frames, [f.t0 for f in flags], source, w.stride, w.length, w.lead_ms, w.crop_ms)
    if ws.n_pos == 0:
        raise DataError(f"{source}: no positive windows ({len(flags)} flags)")
    split = downsample_training(split_dataset(ws, cfg.seed, w.ratios))
    stats = {
        "source": source,
        "flags": len(flags),
        "dropped_flags": dropped,
        "windows": len(ws),
        "positives": ws.n_pos,
        "frequency": ws.n_pos / len(ws),
    }
    return split, stats


def _train_cfg(cfg: RunConfig) -> TrainConfig:
    return replace(cfg.train, threshold=cfg.eval.threshold)


def _splits_from_archive(name: str, path: Path) -> SampleSplits:
    a = load_archive(path)
    return SampleSplits(name, a.train, a.val, a.test)


# ---------------------------------------------------------------- commands


def cmd_generate(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    samples = {}
    for style in SAMPLE_STYLES:
        t = time.time()
        s = build_sample(style, cfg.seed, cfg.generate.total_windows, cfg.windows.stride)
        write_sample(s, out / s.name)
        log.info("%s: %d updates, %d attempt(s), %.1fs", s.name, s.stats["updates"], s.attempts, time.time() - t)
        samples[s.name] = {
            "target_frequency": s.target,
            "attempts": s.attempts,
            **s.stats,
            "files": {f: _sha(out / s.name / f) for f in ("stream.ndjson", "truth.json", "scenario.json")},
        }
    _write_manifest(out, "generate", cfg, {"samples": samples})
    return EXIT_OK


def cmd_label(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    frames, flags = label_stream(Path(args.stream), cfg)
    write_flags(flags, out / "flags.ndjson")
    if args.frames:
        write_frames_csv(frames, out / "frames.csv")
    _write_manifest(
        out,
        "label",
        cfg,
        {
            "stream": str(args.stream),
            "stream_sha256": _sha(args.stream),
            "updates": len(frames),
            "flags": len(flags),
            "anomalies": frames.anomalies,
            "flags_sha256": _sha(out / "flags.ndjson"),
        },
    )
    print(f"{len(flags)} flag(s) in {len(frames)} updates; anomalies {frames.anomalies}")
    return EXIT_OK


def cmd_dataset(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    stream_path = Path(args.stream)
    stream = read_stream(stream_path)
    f = cfg.features
    frames = replay(stream, f.vol_window, f.vol_lag, f.depth)
    flags = read_flags(args.flags) if args.flags else flag_spoofing(frames, cfg.label.thresholds())
    split, stats = dataset_from(frames, flags, cfg, args.name or stream_path.parent.name)
    save_archive(split, out, {"config": cfg.to_dict(), "config_sha256": _config_hash(cfg), "stats": stats, "command": "dataset"})
    print(json.dumps(split.counts()))
    return EXIT_OK


def _load_pool(paths: Sequence[str]) -> tuple[ArchiveSplit, ArchiveSplit, list[SampleSplits]]:
    samples = [_splits_from_archive(Path(p).name, Path(p)) for p in paths]
    cat = lambda parts: ArchiveSplit(
        np.concatenate([p.X for p in parts]), np.concatenate([p.y for p in parts]), np.concatenate([p.t0 for p in parts])
    )
    return cat([s.train for s in samples]), cat([s.val for s in samples]), samples


def cmd_train(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    tr, va, samples = _load_pool(args.archives)
    tcfg = replace(_train_cfg(cfg), seed=cfg.seed)
    trials = []
    if cfg.search.budget > 0:
        tcfg, found = random_search(cfg.search.space(), cfg.search.budget, tr.X, tr.y, va.X, va.y, cfg.seed, tcfg)
        trials = [{"config": t.config.to_dict(), "score": t.score, "best_epoch": t.best_epoch} for t in found]
    res = train(tr.X, tr.y, va.X, va.y, tcfg)
    save_checkpoint(res.model, out / "model.ckpt", tcfg, {"archives": [str(a) for a in args.archives]})
    metrics = {s.name: evaluate(res.model, s.test.X, s.test.y, tcfg.threshold).to_dict() for s in samples}
    (out / "history.json").write_text(json.dumps(res.history, indent=2) + "\n")
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        out,
        "train",
        cfg,
        {
            "archives": [str(a) for a in args.archives],
            "train_config": tcfg.to_dict(),
            "search_trials": trials,
            "best_epoch": res.best_epoch,
            "train_size": int(len(tr.y)),
            "checkpoint_sha256": _sha(out / "model.ckpt"),
            "metrics": metrics,
        },
    )
    for name, m in metrics.items():
        print(f"{name}: weighted accuracy {m['weighted_accuracy']}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    model, header = load_checkpoint(args.checkpoint)
    thr = (header.get("config") or {}).get("threshold", cfg.eval.threshold)
    metrics = {}
    for p in args.archives:
        a = load_archive(p)
        part = getattr(a, args.split)
        metrics[Path(p).name] = evaluate(model, part.X, part.y, thr).to_dict()
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "eval", cfg, {"checkpoint": str(args.checkpoint), "split": args.split, "metrics": metrics})
    for name, m in metrics.items():
        print(f"{name}: weighted accuracy {m['weighted_accuracy']}")
    return EXIT_OK


def prepare_benchmark(bench: Path, data_dir: Path, cfg: RunConfig) -> list[SampleSplits]:
    """Label and window every sample under ``bench`` (reusing archives already in ``data_dir``)."""
    dirs = sorted(p for p in bench.iterdir() if (p / "stream.ndjson").exists())
    if not dirs:
        raise DataError(f"{bench}: no sample directories with stream.ndjson")
    samples = []
    for d in dirs:
        arch = data_dir / d.name
        if not (arch / "manifest.json").exists():
            frames, flags = label_stream(d / "stream.ndjson", cfg)
            split, stats = dataset_from(frames, flags, cfg, d.name)
            save_archive(split, arch, {"config": cfg.to_dict(), "config_sha256": _config_hash(cfg), "stats": stats, "command": "dataset"})
            write_flags(flags, arch / "flags.ndjson")
            log.info("%s: %d flags, %s", d.name, len(flags), split.counts())
        samples.append(_splits_from_archive(d.name, arch))
    return samples


def cmd_matrix(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    bench = Path(args.bench)
    if args.smoke and not (bench / "manifest.json").exists():
        log.info("generating smoke benchmark in %s", bench)
        gen_args = argparse.Namespace(out=str(bench))
        cmd_generate(gen_args, cfg)
    samples = prepare_benchmark(bench, out / "data", cfg)
    tcfg = _train_cfg(cfg)
    seeds = run_seeds(cfg.seed, cfg.eval.seeds)
    progress = lambda r: log.info("train=%s seed=%d %s %s", r.train_on, r.seed, r.status, r.error or "")
    body = {"bench": str(bench), "seeds": seeds, "train_config": tcfg.to_dict()}
    status = EXIT_OK
    if args.design in ("cross", "both"):
        mres = cross_sample_matrix(samples, tcfg, seeds, out / "checkpoints", progress)
        write_report(mres, out, "matrix")
        print(Path(out / "matrix.txt").read_text())
        body["matrix_overall"] = mres.overall()
        if any(r.status != "ok" for r in mres.runs):
            status = EXIT_DIVERGED
    if args.design in ("pooled", "both"):
        pres = pooled_eval(samples, tcfg, seeds, out / "checkpoints", progress)
        write_report(pres, out, "pooled")
        print(Path(out / "pooled.txt").read_text())
        body["pooled_mean_weighted_accuracy"] = pres.mean_weighted_accuracy()
        if any(r.status != "ok" for r in pres.runs):
            status = EXIT_DIVERGED
    _write_manifest(out, "matrix", cfg, body)
    return status


def cmd_report(args, cfg: RunConfig) -> int:
    out = _out_dir(args)
    if not args.stream and not args.results:
        raise UsageError("report needs --stream (with optional --flags) or --results")
    made = {}
    if args.stream:
        stream = read_stream(args.stream)
        f = cfg.features
        frames = replay(stream, f.vol_window, f.vol_lag, f.depth)
        flags = read_flags(args.flags) if args.flags else flag_spoofing(frames, cfg.label.thresholds())
        paths = plot_flags(frames, flags, out / "plots")
        made["plots"] = len(paths)
    for p in args.results or []:
        d = json.loads(Path(p).read_text())
        res = MatrixResult.from_dict(d) if d.get("design") == "cross_sample" else PooledResult.from_dict(d)
        write_report(res, out, Path(p).stem)
        print(Path(out / f"{Path(p).stem}.txt").read_text())
        made[Path(p).stem] = "ok"
    print(json.dumps(made))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (unknown keys rejected)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--smoke", action="store_true", help="one seed, reduced budget")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="lobspoof", description="Spoofing labelling and early detection on L2 order-book streams.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("generate", parents=[common], help="build the 4-sample synthetic benchmark")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("label", parents=[common], help="replay a stream and flag spoofing cancels")
    s.add_argument("stream")
    s.add_argument("--frames", action="store_true", help="also dump per-update frames as CSV")
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("dataset", parents=[common], help="windows + split archive for one stream")
    s.add_argument("stream")
    s.add_argument("--flags", help="flags NDJSON (labelled on the fly when omitted)")
    s.add_argument("--name", help="source id recorded in the archive")
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", parents=[common], help="train on one or more archives (pooled)")
    s.add_argument("archives", nargs="+")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on archives")
    s.add_argument("checkpoint")
    s.add_argument("archives", nargs="+")
    s.add_argument("--split", choices=("train", "val", "test"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("matrix", parents=[common], help="cross-sample matrix and pooled design")
    s.add_argument("bench", help="benchmark directory from `generate`")
    s.add_argument("--design", choices=("cross", "pooled", "both"), default="both")
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("report", parents=[common], help="flag plots and result tables")
    s.add_argument("--stream")
    s.add_argument("--flags")
    s.add_argument("--results", nargs="*", help="matrix.json / pooled.json files to re-render")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        try:
            cfg = load_config(args.config)
        except (ValueError, TypeError, OSError) as exc:
            raise UsageError(f"bad config: {exc}") from None
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.smoke:
            cfg = cfg.smoked()
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"lobspoof: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"lobspoof: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, StreamFormatError, GenerationError, FileNotFoundError, ValueError) as exc:
        print(f"lobspoof: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
