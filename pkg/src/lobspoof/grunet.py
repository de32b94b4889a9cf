"""Stacked GRU classifier written directly against numpy.

The network reads a (batch, time, features) tensor, runs one or more GRU
layers from a zero hidden state, feeds the last top-layer hidden state to a
small tanh head and returns a sigmoid probability. Gradients come from
hand-written backpropagation through time; training uses Adam with a
per-epoch exponential learning-rate decay.

Cell (per layer, per step)::

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    c = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * c
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metrics import Metrics, confusion

BCE_EPS = 1e-7
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CHECKPOINT_MAGIC = b"LOBGRU\x00\x00"
CHECKPOINT_VERSION = 1
GATE_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")
HEAD_NAMES = ("A", "a", "B", "b")


class TrainingDiverged(RuntimeError):
    """Non-finite loss or parameters during training."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow warnings for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------- parameters


@dataclass
class GruLayerParams:
    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in GATE_NAMES]

    def check(self) -> None:
        H, I = self.hidden_size, self.input_size
        want = {"W": (H, I), "U": (H, H), "b": (H,)}
        for n in GATE_NAMES:
            a = getattr(self, n)
            if a.shape != want[n[0]]:
                raise ValueError(f"{n} has shape {a.shape}, expected {want[n[0]]}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{n} has non-finite entries")

    @classmethod
    def init(cls, input_size: int, hidden: int, rng: np.random.Generator) -> "GruLayerParams":
        k = math.sqrt(1.0 / hidden)
        parts = {}
        for g in ("z", "r", "h"):
            parts[f"W_{g}"] = rng.uniform(-k, k, (hidden, input_size))
            parts[f"U_{g}"] = rng.uniform(-k, k, (hidden, hidden))
            parts[f"b_{g}"] = np.zeros(hidden)
        return cls(**parts)

    @classmethod
    def zeros(cls, input_size: int, hidden: int) -> "GruLayerParams":
        parts = {}
        for g in ("z", "r", "h"):
            parts[f"W_{g}"] = np.zeros((hidden, input_size))
            parts[f"U_{g}"] = np.zeros((hidden, hidden))
            parts[f"b_{g}"] = np.zeros(hidden)
        return cls(**parts)


@dataclass
class Head:
    """Affine H->D, tanh, affine D->1."""

    A: np.ndarray  # (D, H)
    a: np.ndarray  # (D,)
    B: np.ndarray  # (1, D)
    b: np.ndarray  # (1,)

    def arrays(self) -> list[np.ndarray]:
        return [self.A, self.a, self.B, self.b]

    @classmethod
    def init(cls, hidden: int, width: int, rng: np.random.Generator) -> "Head":
        k1 = math.sqrt(1.0 / hidden)
        k2 = math.sqrt(1.0 / width)
        return cls(
            rng.uniform(-k1, k1, (width, hidden)),
            np.zeros(width),
            rng.uniform(-k2, k2, (1, width)),
            np.zeros(1),
        )

    @classmethod
    def zeros(cls, hidden: int, width: int) -> "Head":
        return cls(np.zeros((width, hidden)), np.zeros(width), np.zeros((1, width)), np.zeros(1))


@dataclass
class GruModel:
    layers: list[GruLayerParams]
    head: Head
    dropout: float = 0.0
    norm_mean: Optional[np.ndarray] = None
    norm_std: Optional[np.ndarray] = None

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def head_width(self) -> int:
        return self.head.A.shape[0]

    def params(self) -> list[np.ndarray]:
        """All parameter arrays in checkpoint order (layers bottom-up, then head)."""
        out = []
        for layer in self.layers:
            out.extend(layer.arrays())
        out.extend(self.head.arrays())
        return out

    def param_names(self) -> list[str]:
        names = []
        for i in range(len(self.layers)):
            names.extend(f"layer{i}.{n}" for n in GATE_NAMES)
        names.extend(f"head.{n}" for n in HEAD_NAMES)
        return names

    def copy(self) -> "GruModel":
        return GruModel(
            [GruLayerParams(*[a.copy() for a in l.arrays()]) for l in self.layers],
            Head(*[a.copy() for a in self.head.arrays()]),
            self.dropout,
            None if self.norm_mean is None else self.norm_mean.copy(),
            None if self.norm_std is None else self.norm_std.copy(),
        )

    def normalize(self, X: np.ndarray) -> np.ndarray:
        if self.norm_mean is None:
            return np.asarray(X, dtype=np.float64)
        return (np.asarray(X, dtype=np.float64) - self.norm_mean) / self.norm_std

    def predict_proba(self, X: np.ndarray, batch: int = 1024) -> np.ndarray:
        """Probabilities for raw (unnormalized) windows; dropout is off."""
        X = self.normalize(X)
        if len(X) == 0:
            return np.zeros(0)
        return np.concatenate([forward(self, X[i : i + batch])[0] for i in range(0, len(X), batch)])

    @classmethod
    def init(cls, input_size: int, hidden: int, n_layers: int, head_width: int, seed: int, dropout: float = 0.0) -> "GruModel":
        rng = np.random.default_rng(seed)
        layers = []
        for i in range(n_layers):
            layers.append(GruLayerParams.init(input_size if i == 0 else hidden, hidden, rng))
        return cls(layers, Head.init(hidden, head_width, rng), dropout)


# ---------------------------------------------------------------- forward / backward


@dataclass
class _LayerCache:
    x: np.ndarray  # (B, T, I) layer input after dropout
    h: np.ndarray  # (B, T+1, H) with h[:, 0] = 0
    z: np.ndarray
    r: np.ndarray
    c: np.ndarray
    mask: Optional[np.ndarray]  # dropout mask applied to x (scaled), or None


@dataclass
class ForwardCache:
    layers: list[_LayerCache]
    u: np.ndarray  # head pre-activation (B, D)
    v: np.ndarray  # tanh(u)
    p: np.ndarray  # (B,)


def _layer_forward(lp: GruLayerParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    B, T, _ = x.shape
    H = lp.hidden_size
    # input projections for all steps at once
    xz = x @ lp.W_z.T + lp.b_z
    xr = x @ lp.W_r.T + lp.b_r
    xh = x @ lp.W_h.T + lp.b_h
    Uzr = np.concatenate([lp.U_z, lp.U_r]).T  # (H, 2H)
    UhT = lp.U_h.T
    h = np.zeros((B, T + 1, H))
    z = np.empty((B, T, H))
    r = np.empty((B, T, H))
    c = np.empty((B, T, H))
    hp = h[:, 0]
    for t in range(T):
        zr = hp @ Uzr
        zt = sigmoid(xz[:, t] + zr[:, :H])
        rt = sigmoid(xr[:, t] + zr[:, H:])
        ct = np.tanh(xh[:, t] + (rt * hp) @ UhT)
        hp = hp + zt * (ct - hp)
        z[:, t], r[:, t], c[:, t], h[:, t + 1] = zt, rt, ct, hp
    return h, z, r, c


def forward(
    model: GruModel,
    X: np.ndarray,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Probabilities for normalized windows ``X`` (B, T, I).

    Dropout between layers is applied only when ``rng`` is given.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != model.input_size:
        raise ValueError(f"expected (B, T, {model.input_size}) input, got {X.shape}")
    caches = []
    x = X
    for i, lp in enumerate(model.layers):
        mask = None
        if i > 0 and rng is not None and model.dropout > 0:
            keep = 1.0 - model.dropout
            mask = (rng.random(x.shape) < keep) / keep
            x = x * mask
        h, z, r, c = _layer_forward(lp, x)
        caches.append(_LayerCache(x, h, z, r, c, mask))
        x = h[:, 1:]
    last = x[:, -1] if x.shape[1] else np.zeros((x.shape[0], model.hidden_size))
    u = last @ model.head.A.T + model.head.a
    v = np.tanh(u)
    o = v @ model.head.B.T + model.head.b
    p = sigmoid(o[:, 0])
    return p, ForwardCache(caches, u, v, p)


def gru_forward(model: GruModel, window: np.ndarray) -> float:
    """Probability for one normalized (T, I) window."""
    p, _ = forward(model, np.asarray(window, dtype=np.float64)[None])
    return float(p[0])


def bce_loss(p, y, w_pos: float = 1.0) -> float:
    """Mean weighted binary cross-entropy with ``p`` clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(w_pos * y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def backward(model: GruModel, cache: ForwardCache, y: np.ndarray, w_pos: float = 1.0) -> list[np.ndarray]:
    """Gradients of the mean batch loss, in ``model.params()`` order."""
    y = np.asarray(y, dtype=np.float64)
    p = cache.p
    n = len(p)
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    # d loss / d logit, zero where the clamp is active
    do = np.where(inside, -(w_pos * y * (1.0 - p) - (1.0 - y) * p), 0.0) / n
    hd = model.head
    top = cache.layers[-1].h[:, -1]
    gB = do[None, :] @ cache.v
    gb = np.array([do.sum()])
    du = (do[:, None] @ hd.B) * (1.0 - cache.v**2)
    gA = du.T @ top
    ga = du.sum(axis=0)
    dh_last = du @ hd.A

    grads_layers: list[list[np.ndarray]] = []
    dX_next: Optional[np.ndarray] = None  # gradient w.r.t. the output sequence of the layer above's input
    for li in range(len(model.layers) - 1, -1, -1):
        lp = model.layers[li]
        lc = cache.layers[li]
        B, T, _ = lc.x.shape
        H = lp.hidden_size
        dhs = np.zeros((B, T, H)) if dX_next is None else dX_next
        if dX_next is None:
            dhs[:, -1] = dh_last
        daz = np.empty((B, T, H))
        dar = np.empty((B, T, H))
        dah = np.empty((B, T, H))
        gUz = np.zeros((H, H))
        gUr = np.zeros((H, H))
        gUh = np.zeros((H, H))
        Uzr = np.concatenate([lp.U_z, lp.U_r])  # (2H, H)
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = dh + dhs[:, t]
            hp = lc.h[:, t]
            zt, rt, ct = lc.z[:, t], lc.r[:, t], lc.c[:, t]
            dc = dh * zt
            dz = dh * (ct - hp)
            dh_prev = dh * (1.0 - zt)
            a_h = dc * (1.0 - ct * ct)
            rh = rt * hp
            gUh += a_h.T @ rh
            drh = a_h @ lp.U_h
            dh_prev += drh * rt
            a_r = drh * hp * rt * (1.0 - rt)
            a_z = dz * zt * (1.0 - zt)
            gUz += a_z.T @ hp
            gUr += a_r.T @ hp
            dh_prev += np.concatenate([a_z, a_r], axis=1) @ Uzr
            daz[:, t], dar[:, t], dah[:, t] = a_z, a_r, a_h
            dh = dh_prev
        x2 = lc.x.reshape(B * T, -1)
        fz, fr, fh = (d.reshape(B * T, H) for d in (daz, dar, dah))
        g = [
            fz.T @ x2, gUz, fz.sum(axis=0),
            fr.T @ x2, gUr, fr.sum(axis=0),
            fh.T @ x2, gUh, fh.sum(axis=0),
        ]
        grads_layers.append(g)
        if li > 0:
            dx = daz @ lp.W_z + dar @ lp.W_r + dah @ lp.W_h
            if lc.mask is not None:
                dx = dx * lc.mask
            dX_next = dx
    out = []
    for g in reversed(grads_layers):
        out.extend(g)
    out.extend([gA, ga, gB, gb])
    return out


def loss_and_grad(model: GruModel, X: np.ndarray, y: np.ndarray, w_pos: float = 1.0, rng=None) -> tuple[float, list[np.ndarray]]:
    p, cache = forward(model, X, rng)
    return bce_loss(p, y, w_pos), backward(model, cache, y, w_pos)


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> tuple[AdamState, list[np.ndarray]]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, params


def decayed_lr(lr0: float, gamma: float, epoch: int) -> float:
    return lr0 * gamma**epoch


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    total = math.sqrt(sum(float(np.vdot(g, g)) for g in grads))
    if max_norm > 0 and total > max_norm:
        s = max_norm / total
        for g in grads:
            g *= s
    return total


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    layers: int = 1
    hidden: int = 32
    dropout: float = 0.1
    lr: float = 3e-3
    decay: float = 0.95
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    w_pos: float = 1.0
    head_width: int = 32
    clip_norm: float = 5.0
    threshold: float = 0.5

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.head_width < 1:
            raise ValueError("layers, hidden and head_width must be positive")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    model: GruModel
    history: list[dict]
    best_epoch: int  # -1 when no epoch ran
    config: TrainConfig


def _score(m: Metrics) -> float:
    w = m.weighted_accuracy
    if w is None:
        w = m.accuracy
    return -1.0 if w is None else w


def train(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    norm: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> TrainResult:
    """Fit a model on raw windows; returns the epoch with the best validation weighted accuracy.

    ``norm`` is (mean, std) per feature; fitted on ``X_train`` when omitted.
    Ties in validation score go to the lower validation loss, then the earlier epoch.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if len(X_train) == 0:
        raise ValueError("empty training set")
    if cfg.epochs > 0 and len(np.unique(y_train)) < 2:
        raise ValueError("training set needs both classes")
    if norm is None:
        flat = X_train.reshape(-1, X_train.shape[-1])
        mean, std = flat.mean(axis=0), flat.std(axis=0)
        std = np.where(std > 0, std, 1.0)
    else:
        mean, std = (np.asarray(a, dtype=np.float64) for a in norm)
    model = GruModel.init(X_train.shape[2], cfg.hidden, cfg.layers, cfg.head_width, cfg.seed, cfg.dropout)
    model.norm_mean, model.norm_std = mean, std
    Xt = model.normalize(X_train)
    Xv = model.normalize(X_val)
    rng = np.random.default_rng([cfg.seed, 1])
    params = model.params()
    state = AdamState.for_params(params)
    history: list[dict] = []
    best = model.copy()
    best_key = None
    best_epoch = -1
    n = len(Xt)
    for epoch in range(cfg.epochs):
        lr = decayed_lr(cfg.lr, cfg.decay, epoch)
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads = loss_and_grad(model, Xt[idx], y_train[idx], cfg.w_pos, rng)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}, batch {s // cfg.batch_size}")
            gnorm = clip_global_norm(grads, cfg.clip_norm)
            if not math.isfinite(gnorm):
                raise TrainingDiverged(f"non-finite gradient norm at epoch {epoch}")
            adam_step(state, params, grads, lr)
            total += loss * len(idx)
        pv = _predict_normalized(model, Xv)
        val_loss = bce_loss(pv, y_val, cfg.w_pos) if len(pv) else float("nan")
        m = confusion(pv, y_val, cfg.threshold)
        rec = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": total / n,
            "val_loss": val_loss,
            "val_weighted_accuracy": m.weighted_accuracy,
            "val_accuracy": m.accuracy,
        }
        history.append(rec)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDiverged(f"non-finite parameters after epoch {epoch}")
        key = (_score(m), -val_loss if math.isfinite(val_loss) else -math.inf)
        if best_key is None or key > best_key:
            best_key, best, best_epoch = key, model.copy(), epoch
    return TrainResult(best, history, best_epoch, cfg)


def _predict_normalized(model: GruModel, X: np.ndarray, batch: int = 1024) -> np.ndarray:
    if len(X) == 0:
        return np.zeros(0)
    return np.concatenate([forward(model, X[i : i + batch])[0] for i in range(0, len(X), batch)])


# ---------------------------------------------------------------- random search


@dataclass(frozen=True)
class SearchSpace:
    layers: tuple[int, ...] = (1, 2, 3)
    hidden: tuple[int, ...] = (32, 64, 128)
    dropout: tuple[float, float] = (0.0, 0.5)
    lr: tuple[float, float] = (1e-4, 1e-2)  # sampled log-uniformly
    epochs: tuple[int, int] = (20, 100)

    def sample(self, rng: np.random.Generator, base: TrainConfig) -> TrainConfig:
        lo, hi = math.log(self.lr[0]), math.log(self.lr[1])
        return replace(
            base,
            layers=int(self.layers[rng.integers(len(self.layers))]),
            hidden=int(self.hidden[rng.integers(len(self.hidden))]),
            dropout=float(rng.uniform(*self.dropout)) if self.dropout[1] > self.dropout[0] else float(self.dropout[0]),
            lr=float(math.exp(rng.uniform(lo, hi))) if hi > lo else float(self.lr[0]),
            epochs=int(rng.integers(self.epochs[0], self.epochs[1] + 1)),
        )


@dataclass
class SearchTrial:
    config: TrainConfig
    score: float
    best_epoch: int


def random_search(
    space: SearchSpace,
    budget: int,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    seed: int = 0,
    base: TrainConfig = TrainConfig(),
) -> tuple[TrainConfig, list[SearchTrial]]:
    """Sample ``budget`` configs and keep the one with the best validation weighted accuracy.

    Diverged trials score -1. The first trial wins ties.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng([seed, 2])
    trials = []
    for k in range(budget):
        cfg = space.sample(rng, replace(base, seed=seed * 1000 + k))
        try:
            res = train(X_train, y_train, X_val, y_val, cfg)
            m = confusion(res.model.predict_proba(X_val), y_val, cfg.threshold)
            score = _score(m)
            best_epoch = res.best_epoch
        except TrainingDiverged:
            score, best_epoch = -1.0, -1
        trials.append(SearchTrial(cfg, score, best_epoch))
    best = max(range(budget), key=lambda i: (trials[i].score, -i))
    return trials[best].config, trials


# ---------------------------------------------------------------- checkpoint IO


def save_checkpoint(model: GruModel, path, config: Optional[TrainConfig] = None, extra: Optional[dict] = None) -> None:
    """Magic, uint64 LE header length, JSON header, then float64 LE parameter blocks."""
    names = model.param_names()
    arrays = model.params()
    header = {
        "format": "lobspoof-gru",
        "version": CHECKPOINT_VERSION,
        "input_size": model.input_size,
        "hidden": model.hidden_size,
        "layers": len(model.layers),
        "head_width": model.head_width,
        "dropout": model.dropout,
        "params": [{"name": n, "shape": list(a.shape)} for n, a in zip(names, arrays)],
        "normalization": None
        if model.norm_mean is None
        else {"mean": model.norm_mean.tolist(), "std": model.norm_std.tolist()},
        "config": None if config is None else config.to_dict(),
        "seed": None if config is None else config.seed,
    }
    if extra:
        header["extra"] = extra
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[GruModel, dict]:
    data = Path(path).read_bytes()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    header = json.loads(data[off : off + hlen])
    off += hlen
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    arrays = []
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if off + nbytes > len(data):
            raise ValueError(f"{path}: truncated at {spec['name']}")
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64))
        off += nbytes
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    n_layers = header["layers"]
    layers = [GruLayerParams(*arrays[9 * i : 9 * i + 9]) for i in range(n_layers)]
    head = Head(*arrays[9 * n_layers :])
    norm = header.get("normalization")
    model = GruModel(
        layers,
        head,
        header["dropout"],
        None if norm is None else np.asarray(norm["mean"], dtype=np.float64),
        None if norm is None else np.asarray(norm["std"], dtype=np.float64),
    )
    for lp in layers:
        lp.check()
    return model, header
