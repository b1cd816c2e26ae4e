"""Pure-Python/NumPy twin of ``_kernels.pyx``.

Same random stream, same split order, same floating-point expressions, so
both backends grow identical trees from identical seeds.
"""
import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1


class XorShift:
    """xorshift64* seeded through splitmix64."""

    __slots__ = ("state",)

    def __init__(self, seed):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        z ^= z >> 31
        self.state = z or 0x2545F4914F6CDD1D

    def next(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def bounded(self, n):
        return self.next() % n


def bootstrap_indices(n, seed):
    rng = XorShift(seed)
    return np.array([rng.bounded(n) for _ in range(n)], dtype=np.int64), rng


def _best_split_feature(vals, labels, n0, n1, cw0, cw1, min_leaf):
    """Best (proxy, threshold) for one feature, or (-inf, nan)."""
    m = vals.size
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    c1 = np.cumsum(labels[order])[:-1].astype(np.float64)
    nl = np.arange(1, m, dtype=np.float64)
    c0 = nl - c1
    valid = (v[:-1] < v[1:]) & (nl >= min_leaf) & ((m - nl) >= min_leaf)
    if not valid.any():
        return -np.inf, np.nan
    wl0 = c0 * cw0
    wl1 = c1 * cw1
    wr0 = (n0 - c0) * cw0
    wr1 = (n1 - c1) * cw1
    wl = wl0 + wl1
    wr = wr0 + wr1
    with np.errstate(divide="ignore", invalid="ignore"):
        proxy = (wl0 * wl0 + wl1 * wl1) / wl + (wr0 * wr0 + wr1 * wr1) / wr
    proxy = np.where(valid, proxy, -np.inf)
    i = int(np.argmax(proxy))
    thr = 0.5 * (v[i] + v[i + 1])
    if thr >= v[i + 1] or thr < v[i]:
        thr = v[i]
    return proxy[i], thr


def fit_tree(X, y, class_weight, max_depth, min_leaf, mtry, seed):
    """Grow one bootstrapped CART tree (Gini).

    Returns ``(feature, threshold, left, right, value)``; leaves have
    ``feature == -1`` and ``value`` is the weighted-majority class.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n, p = X.shape
    cw0, cw1 = float(class_weight[0]), float(class_weight[1])
    samples, rng = bootstrap_indices(n, seed)
    feats = list(range(p))
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(0, n, 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        idx = samples[start:end]
        lab = y[idx]
        m = end - start
        n1 = int(lab.sum())
        n0 = m - n1
        w0 = n0 * cw0
        w1 = n1 * cw1
        value.append(1 if w1 > w0 else 0)
        if depth >= max_depth or n0 == 0 or n1 == 0 or m < 2 * min_leaf:
            continue
        for i in range(mtry):
            j = i + rng.bounded(p - i)
            feats[i], feats[j] = feats[j], feats[i]
        wt = w0 + w1
        parent_proxy = (w0 * w0 + w1 * w1) / wt
        best = parent_proxy * (1.0 + 1e-10)
        best_f, best_t = -1, 0.0
        for f in feats[:mtry]:
            score, thr = _best_split_feature(X[idx, f], lab, n0, n1, cw0, cw1, min_leaf)
            if score > best:
                best, best_f, best_t = score, f, thr
        if best_f < 0:
            continue
        go_left = X[idx, best_f] <= best_t
        nl = int(go_left.sum())
        samples[start:end] = np.concatenate([idx[go_left], idx[~go_left]])
        feature[node] = best_f
        threshold[node] = best_t
        stack.append((start + nl, end, depth + 1, node, False))
        stack.append((start, start + nl, depth + 1, node, True))
    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.uint8),
    )


def predict_votes(X, feature, threshold, left, right, value, roots):
    """Number of trees voting for class 1, per row.

    Trees are concatenated; child indices are absolute, ``roots`` holds the
    root node of each tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    rows = np.arange(X.shape[0])
    votes = np.zeros(X.shape[0], dtype=np.int64)
    for root in roots:
        node = np.full(X.shape[0], root, dtype=np.int64)
        while True:
            f = feature[node]
            active = f >= 0
            if not active.any():
                break
            fa = f[active]
            xa = X[rows[active], fa]
            na = node[active]
            node[active] = np.where(xa <= threshold[na], left[na], right[na])
        votes += value[node]
    return votes


# ---------------------------------------------------------------------------
# delineation


def _seqmean(a):
    # sequential summation, matching the compiled loop
    return float(np.cumsum(a)[-1]) / a.size


def _walk_out(absd, start, step, thr, limit):
    k = start
    while k != limit and absd[k] < thr:
        k += step
    while k != limit and absd[k] >= thr:
        k += step
    return k


def delineate_beats(xq, xs, ds, idx, windows, p_rel, t_rel, noise_thr, slope_frac):
    """Per-beat fiducials (see ``afr_ecg.delineation``); returns a (10, n_beats) float array.

    ``windows`` holds sample counts for 10, 40, 50, 80, 250 and 400 ms.
    Rows follow ``delineation.FIDUCIALS``; NaN marks missing points.
    """
    w10, w40, w50, w80, w250, w400 = (int(w) for w in windows)
    xq = np.asarray(xq, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ds = np.asarray(ds, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    n = xq.size
    nb = idx.size
    absdq = np.abs(np.gradient(xq))
    out = np.full((10, nb), np.nan)
    prev_t_off = -(10**9)
    for i in range(nb):
        r0 = int(idx[i])
        lo, hi = max(r0 - w50, 0), min(r0 + w50 + 1, n)
        r = lo + int(np.argmax(np.abs(xq[lo:hi])))
        pol = 1.0 if xq[r] >= 0 else -1.0
        qlo = max(r - w80, 0)
        q = qlo + int(np.argmin(pol * xq[qlo : r + 1]))
        shi = min(r + w80 + 1, n)
        s = r + int(np.argmin(pol * xq[r:shi]))
        thr = slope_frac * float(absdq[qlo:shi].max())
        qrs_on = _walk_out(absdq, q, -1, thr, max(r - 2 * w80, 0))
        j = _walk_out(absdq, s, 1, thr, min(r + 2 * w80, n - 1))
        out[3, i], out[4, i], out[5, i], out[6, i], out[7, i] = qrs_on, q, r, s, j
        r_amp = abs(xq[r] - xq[qrs_on])
        rr = int(idx[i + 1]) - r0 if i + 1 < nb else r0 - int(idx[i - 1])

        p_on = p_peak = p_off = np.nan
        if i > 0:
            plo = max(qrs_on - w250, prev_t_off + 1, 0)
            phi = qrs_on - w50
            if phi - plo > 3:
                level = _seqmean(xq[max(qrs_on - w10, 0) : qrs_on + 1])
                yp = xs[plo : phi + 1] - level
                kp = int(np.argmax(np.abs(yp)))
                amp = yp[kp]
                if abs(amp) >= max(p_rel * r_amp, noise_thr) and 0 < kp < yp.size - 1:
                    pp = plo + kp
                    ppol = 1.0 if amp > 0 else -1.0
                    a0 = max(pp - w80, 0)
                    a1 = max(min(pp + w80, qrs_on - w10), pp + 1)
                    k_up = a0 + int(np.argmax(ppol * ds[a0 : pp + 1]))
                    k_dn = pp + int(np.argmin(ppol * ds[pp : a1 + 1]))
                    d_up, d_dn = ppol * ds[k_up], ppol * ds[k_dn]
                    if d_up > 0 and d_dn < 0:
                        on = k_up + (0.0 - ppol * (xs[k_up] - level)) / d_up
                        off = k_dn + (0.0 - ppol * (xs[k_dn] - level)) / d_dn
                        p_on = min(max(float(np.rint(on)), 0.0), float(pp))
                        p_off = min(max(float(np.rint(off)), float(pp)), float(qrs_on))
                        p_peak = float(pp)

        t_peak = t_off = np.nan
        tlo = j + w40
        thi = min(j + min(w400, int(0.6 * rr + 0.5)), n - 1)
        if not np.isnan(p_off):
            level = _seqmean(xq[int(p_off) : qrs_on + 1])
        else:
            level = _seqmean(xq[max(qrs_on - w40, 0) : qrs_on + 1])
        if thi - tlo > 3:
            yt = xs[tlo : thi + 1] - level
            kt = int(np.argmax(np.abs(yt)))
            amp = yt[kt]
            if abs(amp) >= max(t_rel * r_amp, noise_thr) and kt < yt.size - 1:
                tp = tlo + kt
                tpol = 1.0 if amp > 0 else -1.0
                k_dn = tp + int(np.argmin(tpol * ds[tp : thi + 1]))
                d_dn = tpol * ds[k_dn]
                if d_dn < 0:
                    off = k_dn + (0.0 - tpol * (xs[k_dn] - level)) / d_dn
                    t_peak = float(tp)
                    t_off = min(max(float(np.rint(off)), float(tp)), float(thi))
        if not np.isnan(t_off):
            prev_t_off = int(t_off)
        if 0 < i < nb - 1:
            out[0, i], out[1, i], out[2, i] = p_on, p_peak, p_off
            out[8, i], out[9, i] = t_peak, t_off
    return out
