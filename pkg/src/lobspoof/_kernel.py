"""Compiled replay: book reconstruction and per-update signals in one pass.

Mirrors OrderBook + VolatilityState + extract_frame exactly; the pure-Python
path is the reference used by the tests.
"""

import numba as nb
import numpy as np

SCALE_F = 1e8
EPS_SIGMA = 1e-12


@nb.njit(cache=True, inline="always")
def _search(keys, n, key):
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


@nb.njit(cache=True)
def _grow(arr, n):
    out = np.empty(max(16, 2 * arr.shape[0]), dtype=arr.dtype)
    out[:n] = arr[:n]
    return out


@nb.njit(cache=True)
def _cum(sizes, n, depth):
    s = 0
    m = depth if depth < n else n
    for i in range(m):
        s += sizes[i]
    return s


@nb.njit(cache=True)
def replay_kernel(side, price, size, depth, win, lag):
    n = side.shape[0]
    best_bid = np.zeros(n, np.int64)
    best_ask = np.zeros(n, np.int64)
    cum_bid = np.zeros(n, np.int64)
    cum_ask = np.zeros(n, np.int64)
    pre_cum = np.zeros(n, np.int64)
    delta = np.zeros(n, np.int64)
    cancelled = np.zeros(n, np.int64)
    kind = np.zeros(n, np.int8)
    sigma = np.zeros(n, np.float64)
    dsigma = np.zeros(n, np.float64)
    distance = np.full(n, np.nan)
    usable = np.zeros(n, np.bool_)

    # per side: sorted keys (bid keys negated), sizes aligned with keys
    bk = np.empty(64, np.int64)
    bs = np.empty(64, np.int64)
    ak = np.empty(64, np.int64)
    az = np.empty(64, np.int64)
    nb_ = 0
    na_ = 0

    mids = np.zeros(win, np.float64)
    n_mid = 0
    sig_ring = np.zeros(lag + 1, np.float64)
    n_sig = 0
    cur_sigma = 0.0
    cur_dsigma = 0.0
    noop = 0
    crossed = 0

    for i in range(n):
        sd = side[i]
        p = price[i]
        new = size[i]
        if sd == 0:
            keys = bk
            szs = bs
            cnt = nb_
            key = -p
        else:
            keys = ak
            szs = az
            cnt = na_
            key = p
        pre_cum[i] = _cum(szs, cnt, depth)
        j = _search(keys, cnt, key)
        found = j < cnt and keys[j] == key
        old = szs[j] if found else 0
        if new > 0:
            if found:
                szs[j] = new
            else:
                if cnt == keys.shape[0]:
                    keys = _grow(keys, cnt)
                    szs = _grow(szs, cnt)
                for m in range(cnt, j, -1):
                    keys[m] = keys[m - 1]
                    szs[m] = szs[m - 1]
                keys[j] = key
                szs[j] = new
                cnt += 1
        elif found:
            for m in range(j, cnt - 1):
                keys[m] = keys[m + 1]
                szs[m] = szs[m + 1]
            cnt -= 1
        else:
            noop += 1
        if sd == 0:
            bk = keys
            bs = szs
            nb_ = cnt
        else:
            ak = keys
            az = szs
            na_ = cnt

        d = new - old
        delta[i] = d
        cancelled[i] = -d if d < 0 else 0
        if old == 0 and new > 0:
            kind[i] = 0
        elif new == 0 and old > 0:
            kind[i] = 3
        elif new > old:
            kind[i] = 1
        elif new < old:
            kind[i] = 2
        else:
            kind[i] = 4

        bb = -bk[0] if nb_ > 0 else 0
        ba = ak[0] if na_ > 0 else 0
        best_bid[i] = bb
        best_ask[i] = ba
        cum_bid[i] = _cum(bs, nb_, depth)
        cum_ask[i] = _cum(az, na_, depth)
        if nb_ > 0 and na_ > 0 and bb >= ba:
            crossed += 1

        if nb_ > 0 and na_ > 0:
            mid = (bb + ba) / (2 * SCALE_F)
            mids[n_mid % win] = mid
            n_mid += 1
            m_obs = n_mid if n_mid < win else win
            if m_obs < 2:
                cur_sigma = 0.0
            else:
                # chronological order so results match a direct window computation
                start = n_mid - m_obs
                acc = 0.0
                for q in range(start, n_mid):
                    acc += mids[q % win]
                mean = acc / m_obs
                acc = 0.0
                for q in range(start, n_mid):
                    dv = mids[q % win] - mean
                    acc += dv * dv
                cur_sigma = np.sqrt(acc / m_obs)
            sig_ring[n_sig % (lag + 1)] = cur_sigma
            n_sig += 1
            back = lag if n_sig - 1 >= lag else n_sig - 1
            ref = sig_ring[(n_sig - 1 - back) % (lag + 1)]
            cur_dsigma = (cur_sigma - ref) / max(ref, EPS_SIGMA)
            touch = bb if sd == 0 else ba
            distance[i] = abs(p - touch) / touch
            usable[i] = True
        sigma[i] = cur_sigma
        dsigma[i] = cur_dsigma

    return (
        best_bid, best_ask, cum_bid, cum_ask, pre_cum, delta, cancelled, kind,
        sigma, dsigma, distance, usable, noop, crossed,
        bk[:nb_].copy(), bs[:nb_].copy(), ak[:na_].copy(), az[:na_].copy(),
    )
