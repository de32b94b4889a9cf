"""Slow, obviously-correct reference computations used by the tests.

None of these import package internals beyond plain data containers, so a
bug in the package cannot leak into its own oracle.
"""

from __future__ import annotations

import math

import numpy as np


def rebuild_book(side, price, size, upto):
    """Book after the first ``upto`` updates, rebuilt from scratch (last write per level wins)."""
    levels = ({}, {})
    for s, p, q in zip(side[:upto].tolist(), price[:upto].tolist(), size[:upto].tolist()):
        levels[s][p] = q
    bids = {p: q for p, q in levels[0].items() if q > 0}
    asks = {p: q for p, q in levels[1].items() if q > 0}
    return bids, asks


def rebuild_book_np(side, price, size, upto):
    """Vectorized ``rebuild_book``: keep the last occurrence of each (side, price)."""
    s = side[:upto].astype(np.int64)
    p = price[:upto]
    q = size[:upto]
    key = p * 2 + s
    rev = key[::-1]
    _, first_rev = np.unique(rev, return_index=True)
    last = upto - 1 - first_rev
    keep = last[q[last] > 0]
    bids = dict(zip(p[keep][s[keep] == 0].tolist(), q[keep][s[keep] == 0].tolist()))
    asks = dict(zip(p[keep][s[keep] == 1].tolist(), q[keep][s[keep] == 1].tolist()))
    return bids, asks


def touch_and_depth(bids, asks, depth=25):
    bb = max(bids) if bids else None
    ba = min(asks) if asks else None
    cb = sum(bids[p] for p in sorted(bids, reverse=True)[:depth])
    ca = sum(asks[p] for p in sorted(asks)[:depth])
    return bb, ba, cb, ca


def pstdev(xs):
    n = len(xs)
    if n < 2:
        return 0.0
    m = math.fsum(xs) / n
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / n)


def scalar_gru(x_seq, W, U, b, head):
    """Single-layer GRU with scalar loops; W/U/b are dicts keyed by gate z, r, h."""
    H = len(b["z"])
    h = [0.0] * H
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    for x in x_seq:
        z = [sig(sum(W["z"][i][j] * x[j] for j in range(len(x))) + sum(U["z"][i][k] * h[k] for k in range(H)) + b["z"][i]) for i in range(H)]
        r = [sig(sum(W["r"][i][j] * x[j] for j in range(len(x))) + sum(U["r"][i][k] * h[k] for k in range(H)) + b["r"][i]) for i in range(H)]
        rh = [r[k] * h[k] for k in range(H)]
        c = [math.tanh(sum(W["h"][i][j] * x[j] for j in range(len(x))) + sum(U["h"][i][k] * rh[k] for k in range(H)) + b["h"][i]) for i in range(H)]
        h = [(1 - z[i]) * h[i] + z[i] * c[i] for i in range(H)]
    A, a, B, bb = head
    v = [math.tanh(sum(A[d][k] * h[k] for k in range(H)) + a[d]) for d in range(len(a))]
    o = sum(B[d] * v[d] for d in range(len(a))) + bb
    return sig(o), h


def count_confusion(prob, y, thr=0.5):
    tp = fp = tn = fn = 0
    for p, t in zip(prob, y):
        pred = p >= thr
        if pred and t:
            tp += 1
        elif pred and not t:
            fp += 1
        elif not pred and not t:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn
