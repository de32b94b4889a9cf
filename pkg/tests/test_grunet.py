import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobspoof.grunet import (
    AdamState,
    GruLayerParams,
    GruModel,
    Head,
    SearchSpace,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    backward,
    bce_loss,
    clip_global_norm,
    decayed_lr,
    forward,
    gru_forward,
    load_checkpoint,
    loss_and_grad,
    random_search,
    save_checkpoint,
    train,
)

from oracles import scalar_gru

W = {"z": [[0.5, -0.3], [0.1, 0.2]], "r": [[-0.4, 0.6], [0.3, -0.1]], "h": [[0.7, 0.2], [-0.5, 0.9]]}
Uh = {"z": [[0.2, -0.1], [0.05, 0.3]], "r": [[0.1, 0.4], [-0.2, 0.25]], "h": [[-0.3, 0.6], [0.45, -0.15]]}
B = {"z": [0.1, -0.2], "r": [0.0, 0.05], "h": [-0.1, 0.2]}
HEAD = ([[1.0, -2.0]], [0.3], [1.5], -0.25)
X3 = [[1.0, 0.5], [-0.5, 2.0], [0.25, -1.0]]
# scalar-loop oracle output for the model above, frozen
P_HAND = 0.5795062681084376
H_HAND = (0.10836185133709786, 0.003860048961793039)


def hand_model():
    a = np.array
    layer = GruLayerParams(
        a(W["z"]), a(Uh["z"]), a(B["z"]), a(W["r"]), a(Uh["r"]), a(B["r"]), a(W["h"]), a(Uh["h"]), a(B["h"])
    )
    head = Head(a(HEAD[0]), a(HEAD[1]), a([HEAD[2]]), a([HEAD[3]]))
    return GruModel([layer], head)


def random_model(rng, layers, hidden, inp, width, scale=0.3):
    m = GruModel.init(inp, hidden, layers, width, int(rng.integers(1 << 30)))
    for p in m.params():
        p += rng.normal(0, scale, p.shape)
    return m


def fd_gradient(model, X, y, w, h=1e-5):
    out = []
    for p in model.params():
        g = np.zeros_like(p)
        for ix in np.ndindex(p.shape):
            o = p[ix]
            p[ix] = o + h
            lp = bce_loss(forward(model, X)[0], y, w)
            p[ix] = o - h
            lm = bce_loss(forward(model, X)[0], y, w)
            p[ix] = o
            g[ix] = (lp - lm) / (2 * h)
        out.append(g)
    return out


def rel_error(a, b):
    a = np.concatenate([x.ravel() for x in a])
    b = np.concatenate([x.ravel() for x in b])
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def test_zero_model_outputs_half():
    m = GruModel([GruLayerParams.zeros(3, 4)], Head.zeros(4, 5))
    p, cache = forward(m, np.random.default_rng(0).normal(size=(2, 7, 3)))
    assert p.tolist() == [0.5, 0.5]
    assert np.all(cache.layers[0].h == 0)


def test_hand_computed_recurrence():
    m = hand_model()
    p, cache = forward(m, np.array([X3]))
    assert abs(p[0] - P_HAND) < 1e-12
    np.testing.assert_allclose(cache.layers[0].h[0, -1], H_HAND, rtol=0, atol=1e-12)
    live, _ = scalar_gru(X3, W, Uh, B, HEAD)
    assert abs(gru_forward(m, np.array(X3)) - live) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 50))
def test_hidden_state_bounded(seed, scale):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 2, 4, 3, 3, scale=1.0)
    X = rng.normal(0, scale, size=(3, 25, 3))
    p, cache = forward(m, X)
    for lc in cache.layers:
        assert np.all(np.abs(lc.h) <= 1.0)
    assert np.all((p >= 0) & (p <= 1))


def test_shape_mismatch():
    m = GruModel.init(3, 4, 1, 2, 0)
    with pytest.raises(ValueError):
        forward(m, np.zeros((2, 5, 4)))
    with pytest.raises(ValueError):
        forward(m, np.zeros((5, 3)))


def test_bce_values():
    assert bce_loss([0.5], [1]) == pytest.approx(math.log(2))
    assert bce_loss([1.0], [1]) < 1e-6
    assert bce_loss([0.0], [1]) == pytest.approx(-math.log(1e-7))
    rng = np.random.default_rng(0)
    p, y, w = rng.uniform(0.01, 0.99, 40), rng.integers(0, 2, 40), 2.5
    direct = sum(-(w * t * math.log(q) + (1 - t) * math.log(1 - q)) for q, t in zip(p, y)) / 40
    assert bce_loss(p, y, w) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_gradient_matches_finite_differences(layers):
    rng = np.random.default_rng(layers)
    m = random_model(rng, layers, 4, 3, 5)
    X = rng.normal(size=(2, 6, 3))
    y = np.array([1.0, 0.0])
    _, g = loss_and_grad(m, X, y, 1.7)
    assert rel_error(g, fd_gradient(m, X, y, 1.7)) < 1e-4


def test_gradient_with_dropout_mask_matches_finite_differences():
    rng = np.random.default_rng(3)
    m = random_model(rng, 2, 3, 2, 3)
    m.dropout = 0.4
    X = rng.normal(size=(2, 5, 2))
    y = np.array([0.0, 1.0])
    p, cache = forward(m, X, np.random.default_rng(9))
    g = backward(m, cache, y)
    mask = cache.layers[1].mask

    # the same mask, frozen, as a deterministic function of the parameters
    def masked_loss():
        h1 = forward(GruModel(m.layers[:1], m.head), X)[1].layers[0].h[:, 1:]
        from lobspoof.grunet import _layer_forward, sigmoid

        h2 = _layer_forward(m.layers[1], h1 * mask)[0][:, -1]
        v = np.tanh(h2 @ m.head.A.T + m.head.a)
        return bce_loss(sigmoid((v @ m.head.B.T + m.head.b)[:, 0]), y)

    fd = []
    for prm in m.params():
        gg = np.zeros_like(prm)
        for ix in np.ndindex(prm.shape):
            o = prm[ix]
            prm[ix] = o + 1e-5
            lp = masked_loss()
            prm[ix] = o - 1e-5
            lm = masked_loss()
            prm[ix] = o
            gg[ix] = (lp - lm) / 2e-5
        fd.append(gg)
    assert rel_error(g, fd) < 1e-4


def test_unused_parameters_get_zero_gradient():
    # one step from a zero hidden state never touches the reset gate or recurrent weights
    rng = np.random.default_rng(0)
    m = random_model(rng, 1, 3, 2, 2)
    _, g = loss_and_grad(m, rng.normal(size=(2, 1, 2)), np.array([1.0, 0.0]))
    names = m.param_names()
    for n in ("layer0.W_r", "layer0.U_r", "layer0.b_r", "layer0.U_z", "layer0.U_h"):
        assert np.all(g[names.index(n)] == 0), n


def test_duplicated_batch_rows_same_gradient():
    rng = np.random.default_rng(1)
    m = random_model(rng, 2, 3, 2, 4)
    X = rng.normal(size=(1, 8, 2))
    _, g1 = loss_and_grad(m, X, np.array([1.0]))
    _, g2 = loss_and_grad(m, np.repeat(X, 3, axis=0), np.array([1.0, 1.0, 1.0]))
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_adam_zero_gradient_is_a_no_op():
    p = [np.array([1.0, -2.0])]
    st_ = AdamState.for_params(p)
    adam_step(st_, p, [np.zeros(2)], 0.1)
    assert p[0].tolist() == [1.0, -2.0]
    assert st_.step == 1


def test_adam_first_step_formula():
    g = np.array([0.5, -2.0, 1e-9])
    p = [np.zeros(3)]
    adam_step(AdamState.for_params(p), p, [g.copy()], 0.01)
    expected = -0.01 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(p[0], expected, rtol=1e-12)


def test_adam_second_step_by_hand():
    p = [np.array([0.0])]
    s = AdamState.for_params(p)
    adam_step(s, p, [np.array([1.0])], 0.1)
    adam_step(s, p, [np.array([-1.0])], 0.1)
    m = 0.9 * 0.1 - 0.1
    v = 0.999 * 0.001 + 0.001
    step2 = -0.1 * (m / (1 - 0.81)) / (math.sqrt(v / (1 - 0.999**2)) + 1e-8)
    assert p[0][0] == pytest.approx(-0.1 * 1 / (1 + 1e-8) + step2, rel=1e-12)


def test_lr_decay():
    assert decayed_lr(1.0, 0.9, 2) == pytest.approx(0.81)
    assert decayed_lr(0.3, 1.0, 10) == 0.3


def test_clip_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    assert clip_global_norm(g, 1.0) == 5.0
    assert math.hypot(g[0][0], g[1][0]) == pytest.approx(1.0)


def toy(n, T=30, I=3, offset=1.0, seed=0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.ones(n // 2), np.zeros(n - n // 2)]
    X = rng.normal(size=(n, T, I))
    X[y == 1, :, 0] += offset
    return X, y


def test_zero_epochs_returns_initial_model():
    X, y = toy(20)
    res = train(X, y, X, y, TrainConfig(epochs=0, hidden=4, head_width=3, seed=5))
    assert res.history == [] and res.best_epoch == -1
    init = GruModel.init(3, 4, 1, 3, 5)
    for a, b in zip(res.model.params(), init.params()):
        np.testing.assert_array_equal(a, b)


def test_training_is_deterministic_and_learns():
    X, y = toy(64, offset=2.0)
    Xv, yv = toy(64, offset=2.0, seed=1)
    cfg = TrainConfig(epochs=6, hidden=8, head_width=8, lr=1e-2, seed=3, dropout=0.2, layers=2)
    a = train(X, y, Xv, yv, cfg)
    b = train(X, y, Xv, yv, cfg)
    assert a.history == b.history
    assert max(h["val_weighted_accuracy"] for h in a.history) >= 0.9
    for h in a.history:
        assert set(h) >= {"epoch", "train_loss", "val_loss", "val_weighted_accuracy"}


def test_inference_ignores_dropout():
    m = GruModel.init(3, 4, 2, 3, 0, dropout=0.5)
    X = np.random.default_rng(0).normal(size=(4, 10, 3))
    np.testing.assert_array_equal(m.predict_proba(X), m.predict_proba(X))


def test_training_rejects_single_class():
    X, y = toy(10)
    with pytest.raises(ValueError):
        train(X, np.zeros(10), X, y, TrainConfig(epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    X, y = toy(16, T=5)
    X[3, 2, 1] = np.inf
    norm = (np.zeros(3), np.ones(3))
    with pytest.raises(TrainingDiverged):
        train(X, y, X, y, TrainConfig(epochs=3, hidden=4, head_width=2), norm=norm)


def test_train_config_validation():
    for bad in (dict(lr=0), dict(dropout=1.0), dict(decay=0), dict(decay=1.5), dict(layers=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"nope": 1})


def test_random_search_budget_one_and_degenerate_space():
    X, y = toy(24, T=8)
    base = TrainConfig(hidden=4, head_width=4)
    one = SearchSpace(layers=(1,), hidden=(4,), dropout=(0.1, 0.1), lr=(3e-3, 3e-3), epochs=(2, 2))
    best, trials = random_search(one, 1, X, y, X, y, seed=0, base=base)
    assert len(trials) == 1 and best == trials[0].config
    assert (best.layers, best.hidden, best.dropout, best.lr, best.epochs) == (1, 4, 0.1, 3e-3, 2)


def test_random_search_picks_argmax():
    X, y = toy(24, T=8)
    Xv, yv = toy(40, T=8, seed=2)
    space = SearchSpace(layers=(1, 2), hidden=(2, 4), epochs=(1, 3))
    best, trials = random_search(space, 6, X, y, Xv, yv, seed=1, base=TrainConfig(head_width=4))
    scores = [t.score for t in trials]
    chosen = next(t for t in trials if t.config == best)
    assert chosen.score == max(scores) >= float(np.median(scores))
    for t in trials:
        assert t.config.layers in (1, 2) and t.config.hidden in (2, 4)
        assert 1e-4 <= t.config.lr <= 1e-2 and 0 <= t.config.dropout <= 0.5


def test_checkpoint_round_trip(tmp_path):
    m = GruModel.init(7, 5, 2, 3, 1)
    m.norm_mean, m.norm_std = np.arange(7.0), np.ones(7) * 2
    cfg = TrainConfig(hidden=5, layers=2, head_width=3)
    save_checkpoint(m, tmp_path / "m.ckpt", cfg)
    back, header = load_checkpoint(tmp_path / "m.ckpt")
    for a, b in zip(m.params(), back.params()):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(back.norm_mean, m.norm_mean)
    assert header["config"] == cfg.to_dict()
    X = np.random.default_rng(0).normal(size=(3, 12, 7))
    np.testing.assert_array_equal(m.predict_proba(X), back.predict_proba(X))
    data = (tmp_path / "m.ckpt").read_bytes()
    assert data[:8] == b"LOBGRU\x00\x00"
    (tmp_path / "t.ckpt").write_bytes(data[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "x.ckpt").write_bytes(b"garbage!" + data[8:])
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.ckpt")
