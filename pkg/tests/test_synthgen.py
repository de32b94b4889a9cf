import json

import numpy as np
import pytest

from lobspoof.features import replay
from lobspoof.labeller import flag_spoofing
from lobspoof.orderbook import OrderBook, Side
from lobspoof.stream import read_ndjson
from lobspoof.synthgen import (
    SAMPLE_STYLES,
    GroundTruth,
    ScenarioConfig,
    SpoofSpec,
    build_sample,
    generate_stream,
    random_stream,
    write_sample,
)
from lobspoof.windows import negative_starts


def _cfg(**kw):
    base = dict(duration_ms=40_000, spoofs=[SpoofSpec(15_000, "ask", hold_ms=3000)], seed=5)
    base.update(kw)
    return ScenarioConfig(**base)


def test_generation_is_seeded():
    a, ta = generate_stream(_cfg())
    b, tb = generate_stream(_cfg())
    c, _ = generate_stream(_cfg(seed=6))
    assert a.equals(b) and np.array_equal(ta.provenance, tb.provenance)
    assert not a.equals(c)


def test_book_stays_sane():
    s, truth = generate_stream(_cfg())
    assert np.all(np.diff(s.ts) >= 0)
    book = OrderBook()
    for u in s.updates():
        book.apply(u)
        bb, ba = book.best(Side.BID), book.best(Side.ASK)
        if bb is not None and ba is not None:
            assert bb < ba
    assert book.anomalies.crossed == 0
    assert len(truth.provenance) == len(s)


def test_truth_records_the_cancel():
    s, truth = generate_stream(_cfg())
    (rec,) = truth.spoofs
    assert rec.cancel_ts == int(s.ts[rec.cancel_index])
    assert int(s.size[rec.cancel_index]) == 0
    assert rec.cancel_ts >= 15_000 + 3000
    back = GroundTruth.from_json(json.loads(json.dumps(truth.to_json())))
    assert back.spoofs == truth.spoofs
    np.testing.assert_array_equal(back.provenance, truth.provenance)


def test_max_updates_is_a_prefix():
    s, _ = generate_stream(_cfg())
    cut, _ = generate_stream(_cfg(max_updates=5000))
    assert cut.equals(s[:5000])


@pytest.mark.parametrize(
    "kw",
    [
        dict(guard=0.6),
        dict(size_clip=(0.1, 5.0)),
        dict(depth_min=20),
        dict(spoofs=[SpoofSpec(15_000, "mid")]),
        dict(spoofs=[SpoofSpec(15_000, volume_mult=0.2)]),
        dict(spoofs=[SpoofSpec(15_000, distance=0.02)]),
        dict(spoofs=[SpoofSpec(15_000), SpoofSpec(16_000)]),
        dict(duration_ms=0),
    ],
)
def test_invalid_scenarios_rejected(kw):
    with pytest.raises(ValueError):
        generate_stream(_cfg(**kw))


def test_scenario_dict_round_trip():
    cfg = _cfg()
    assert ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"bogus": 1})


def test_random_stream_is_seeded():
    assert random_stream(1000, seed=1).equals(random_stream(1000, seed=1))
    assert not random_stream(1000, seed=1).equals(random_stream(1000, seed=2))


def test_small_sample_hits_target_frequency(tmp_path):
    style = SAMPLE_STYLES[2]
    s = build_sample(style, seed=1, total_windows=600)
    st = s.stats
    assert st["positives"] == round(style.target * 600)
    assert abs(st["frequency"] - style.target) < 0.003
    frames = replay(s.stream)
    flags = [f.t0 for f in flag_spoofing(frames)]
    assert flags == s.truth.cancel_times()
    assert len(negative_starts(frames.ts, flags, 50)) == st["negatives"]

    write_sample(s, tmp_path / s.name)
    assert read_ndjson(tmp_path / s.name / "stream.ndjson").equals(s.stream)
    regen, _ = generate_stream(ScenarioConfig.from_dict(json.loads((tmp_path / s.name / "scenario.json").read_text())))
    assert regen.equals(s.stream)
