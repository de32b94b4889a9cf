import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lobspoof.evaluation import (
    MatrixResult,
    PooledResult,
    RunRecord,
    SampleSplits,
    cross_sample_matrix,
    evaluate,
    plot_flags,
    pooled_eval,
    render_csv,
    render_text,
    run_seeds,
    write_report,
)
from lobspoof.features import replay
from lobspoof.grunet import GruModel, TrainConfig
from lobspoof.labeller import SpoofingFlag
from lobspoof.metrics import Metrics, confusion
from lobspoof.orderbook import Side
from lobspoof.synthgen import random_stream
from lobspoof.windows import ArchiveSplit

from oracles import count_confusion


def test_constant_half_is_coin_flip():
    y = np.r_[np.ones(7), np.zeros(93)]
    m = confusion(np.full(100, 0.5), y)
    # 0.5 >= threshold: everything predicted positive
    assert (m.tp, m.fp, m.tn, m.fn) == (7, 93, 0, 0)
    assert m.weighted_accuracy == 0.5
    assert confusion(np.full(100, 0.49), y).weighted_accuracy == 0.5


def test_perfect_predictions():
    y = np.array([1, 0, 0, 1, 0])
    m = confusion(y.astype(float), y)
    assert m.fp_rate == 0.0 and m.fn_rate == 0.0
    assert m.weighted_accuracy == 1.0 and m.accuracy == 1.0


def test_manual_counts_on_twenty_windows():
    rng = np.random.default_rng(3)
    prob = rng.random(20)
    y = (rng.random(20) < 0.3).astype(int)
    m = confusion(prob, y, 0.4)
    assert (m.tp, m.fp, m.tn, m.fn) == count_confusion(prob.tolist(), y.tolist(), 0.4)


def test_single_class_gives_no_weighted_accuracy():
    m = confusion(np.array([0.9, 0.1]), np.array([0, 0]))
    assert m.tpr is None and m.weighted_accuracy is None
    assert m.accuracy == 0.5


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metric_identities(tp, fp, tn, fn):
    m = Metrics(tp, fp, tn, fn)
    if tp + fn:
        assert m.tpr + m.fn_rate == pytest.approx(1.0)
    if tn + fp:
        assert m.tnr + m.fp_rate == pytest.approx(1.0)
    if m.weighted_accuracy is not None:
        assert m.weighted_accuracy == pytest.approx(1 - (m.fp_rate + m.fn_rate) / 2)
        assert 0.0 <= m.weighted_accuracy <= 1.0
    assert Metrics.from_dict(json.loads(json.dumps(m.to_dict()))) == m


def test_shape_mismatch_and_empty_input():
    with pytest.raises(ValueError):
        confusion(np.zeros(3), np.zeros(4))
    model = GruModel.init(7, 4, 1, 4, seed=0)
    with pytest.raises(ValueError):
        evaluate(model, np.zeros((0, 5, 7)), np.zeros(0))


def test_run_seeds():
    assert run_seeds(0, 3) == [0, 1, 2]
    assert run_seeds(2, 2) == [2000, 2001]


# ---------------------------------------------------------------- designs on tiny fake samples


def _fake_split(rng, n, shift, T=12):
    y = np.r_[np.ones(n // 2), np.zeros(n - n // 2)].astype(np.int8)
    X = rng.normal(size=(n, T, 7))
    X[y == 1, :, 2] += shift
    return ArchiveSplit(X, y, np.where(y == 1, 1000, -1).astype(np.int64))


@pytest.fixture(scope="module")
def fake_samples():
    rng = np.random.default_rng(0)
    out = []
    for k, shift in enumerate((2.0, 1.5, 2.5, 1.0)):
        out.append(SampleSplits(f"s{k + 1}", _fake_split(rng, 24, shift), _fake_split(rng, 12, shift), _fake_split(rng, 16, shift)))
    return out


FAST = TrainConfig(layers=1, hidden=4, head_width=4, epochs=2, batch_size=8, dropout=0.0)


def test_matrix_shape_and_averages(fake_samples, tmp_path):
    seeds = run_seeds(0, 2)
    res = cross_sample_matrix(fake_samples, FAST, seeds, tmp_path / "ck")
    assert len(res.runs) == 8
    t = res.table()
    assert len(t) == 4 and all(len(r) == 4 for r in t)
    for i, a in enumerate(res.names):
        for j, b in enumerate(res.names):
            vals = [r.metrics[b].weighted_accuracy for r in res.runs if r.train_on == a]
            assert t[i][j] == pytest.approx(np.mean(vals))
    assert res.row_averages()[1] == pytest.approx(np.mean(t[1]))
    assert res.column_averages()[2] == pytest.approx(np.mean([row[2] for row in t]))
    assert res.overall() == pytest.approx(np.mean(t))
    assert len(list((tmp_path / "ck").glob("*.ckpt"))) == 8

    back = MatrixResult.from_dict(json.loads(json.dumps(res.to_dict())))
    assert back.table() == t


def test_matrix_text_and_csv(fake_samples):
    res = cross_sample_matrix(fake_samples, FAST, [0])
    rows = list(csv.reader(io.StringIO(render_csv(res))))
    assert rows[0] == ["train \\ test", "s1", "s2", "s3", "s4", "Average"]
    assert [r[0] for r in rows[1:]] == ["s1", "s2", "s3", "s4", "Average"]
    assert all(len(r) == 6 for r in rows)
    assert float(rows[5][5]) == pytest.approx(res.overall(), abs=0.005)
    assert render_text(res).splitlines()[0].startswith("train \\ test")


def test_pooled_design(fake_samples, tmp_path):
    res = pooled_eval(fake_samples, FAST, [0, 1])
    assert res.train_size == sum(len(s.train.y) for s in fake_samples)
    rows = res.rows()
    assert list(rows) == ["FP", "FN", "Accuracy", "Raw accuracy"]
    for vals in rows.values():
        assert len(vals) == 5
        assert vals[-1] == pytest.approx(np.mean(vals[:4]))
    for k, name in enumerate(res.names):
        m = [r.metrics[name] for r in res.runs]
        assert rows["FP"][k] == pytest.approx(np.mean([x.fp_rate for x in m]))
    paths = write_report(res, tmp_path, "pooled")
    back = PooledResult.from_dict(json.loads(paths["json"].read_text()))
    assert back.rows() == rows
    assert paths["csv"].read_text().splitlines()[0] == ",s1,s2,s3,s4,Average"


def test_failed_runs_are_excluded(fake_samples):
    ok = RunRecord("s1", 0, metrics={s.name: Metrics(1, 1, 1, 1) for s in fake_samples})
    bad = RunRecord("s1", 1, status="failed", error="TrainingDiverged: x")
    res = MatrixResult(["s1"], [ok, bad])
    assert res.cell("s1", "s1") == 0.5
    assert MatrixResult(["s1"], [bad]).cell("s1", "s1") is None
    assert "n/a" in render_text(MatrixResult(["s1"], [bad]))


def test_plot_per_flag(tmp_path):
    ft = replay(random_stream(3000, seed=4))
    ts = ft.ts
    flags = [SpoofingFlag(int(ts[1000]), Side.BID, 100.0, 5.0), SpoofingFlag(int(ts[2000]), Side.ASK, 101.0, 2.0)]
    paths = plot_flags(ft, flags, tmp_path / "a")
    assert len(paths) == 2 and all(p.suffix == ".svg" for p in paths)
    again = plot_flags(ft, flags, tmp_path / "b")
    assert paths[0].read_bytes() == again[0].read_bytes()
