# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree-growing and forest-prediction kernels.

Mirror of ``_kernels_py``; any change here must be made there too.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef inline uint64_t _seed_state(uint64_t seed) noexcept nogil:
    cdef uint64_t z = seed + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    if z == 0:
        z = 0x2545F4914F6CDD1DULL
    return z


cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    cdef uint64_t x = state[0]
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    state[0] = x
    return x * 0x2545F4914F6CDD1DULL


cdef inline void _swap(double* v, int* lab, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double tv = v[i]
    cdef int tl = lab[i]
    v[i] = v[j]
    lab[i] = lab[j]
    v[j] = tv
    lab[j] = tl


cdef void _sort(double* v, int* lab, Py_ssize_t n) noexcept nogil:
    """In-place quicksort of ``v`` carrying ``lab`` along (order of ties irrelevant)."""
    cdef Py_ssize_t i, j, lo, hi, mid
    cdef double pivot, tv
    cdef int tl
    while n > 16:
        mid = n // 2
        if v[mid] < v[0]:
            _swap(v, lab, mid, 0)
        if v[n - 1] < v[0]:
            _swap(v, lab, n - 1, 0)
        if v[n - 1] < v[mid]:
            _swap(v, lab, n - 1, mid)
        pivot = v[mid]
        i = 0
        j = n - 1
        while True:
            while v[i] < pivot:
                i += 1
            while v[j] > pivot:
                j -= 1
            if i >= j:
                break
            _swap(v, lab, i, j)
            i += 1
            j -= 1
        # recurse into the smaller part, loop on the larger
        if j + 1 < n - j - 1:
            _sort(v, lab, j + 1)
            v = v + j + 1
            lab = lab + j + 1
            n = n - j - 1
        else:
            _sort(v + j + 1, lab + j + 1, n - j - 1)
            n = j + 1
    for i in range(1, n):
        tv = v[i]
        tl = lab[i]
        j = i - 1
        while j >= 0 and v[j] > tv:
            v[j + 1] = v[j]
            lab[j + 1] = lab[j]
            j -= 1
        v[j + 1] = tv
        lab[j + 1] = tl


def bootstrap_indices(Py_ssize_t n, uint64_t seed):
    cdef uint64_t state = _seed_state(seed)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = <int64_t>(_next(&state) % <uint64_t>n)
    return out, state


def fit_tree(X, y, class_weight, int max_depth, int min_leaf, int mtry, uint64_t seed):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = Xv.shape[0], p = Xv.shape[1]
    cdef double cw0 = class_weight[0], cw1 = class_weight[1]
    cdef uint64_t state = _seed_state(seed)
    cdef Py_ssize_t cap = 2 * n + 1

    cdef cnp.ndarray[cnp.int32_t, ndim=1] feature = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] threshold = np.zeros(cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] left = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] right = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] value = np.zeros(cap, dtype=np.uint8)

    cdef int64_t* samples = <int64_t*>malloc(n * sizeof(int64_t))
    cdef int64_t* scratch = <int64_t*>malloc(n * sizeof(int64_t))
    cdef double* vals = <double*>malloc(n * sizeof(double))
    cdef int* labs = <int*>malloc(n * sizeof(int))
    cdef int* feats = <int*>malloc(p * sizeof(int))
    # stack entries: start, end, depth, parent, is_left
    cdef int64_t* stack = <int64_t*>malloc(5 * cap * sizeof(int64_t))
    if not (samples and scratch and vals and labs and feats and stack):
        raise MemoryError()

    cdef Py_ssize_t i, j, k, start, end, m, nl, sp = 0, node, n_nodes = 0
    cdef int depth, parent, is_left, f, best_f, tmp
    cdef int64_t n0, n1
    cdef double w0, w1, wt, parent_proxy, best, best_t, score, thr
    cdef double c0, c1, wl0, wl1, wr0, wr1, wl, wr, proxy, fbest, fthr
    try:
        for i in range(n):
            samples[i] = <int64_t>(_next(&state) % <uint64_t>n)
        for i in range(p):
            feats[i] = i
        stack[0] = 0; stack[1] = n; stack[2] = 0; stack[3] = -1; stack[4] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            start = stack[5 * sp]
            end = stack[5 * sp + 1]
            depth = <int>stack[5 * sp + 2]
            parent = <int>stack[5 * sp + 3]
            is_left = <int>stack[5 * sp + 4]
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if is_left:
                    left[parent] = <int>node
                else:
                    right[parent] = <int>node
            m = end - start
            n1 = 0
            for i in range(start, end):
                n1 += yv[samples[i]]
            n0 = m - n1
            w0 = n0 * cw0
            w1 = n1 * cw1
            value[node] = 1 if w1 > w0 else 0
            if depth >= max_depth or n0 == 0 or n1 == 0 or m < 2 * min_leaf:
                continue
            for i in range(mtry):
                j = i + <Py_ssize_t>(_next(&state) % <uint64_t>(p - i))
                tmp = feats[i]; feats[i] = feats[j]; feats[j] = tmp
            wt = w0 + w1
            parent_proxy = (w0 * w0 + w1 * w1) / wt
            best = parent_proxy * (1.0 + 1e-10)
            best_f = -1
            best_t = 0.0
            for k in range(mtry):
                f = feats[k]
                for i in range(m):
                    vals[i] = Xv[samples[start + i], f]
                    labs[i] = <int>yv[samples[start + i]]
                _sort(vals, labs, m)
                c1 = 0.0
                fbest = -1e308
                fthr = 0.0
                j = -1
                for i in range(m - 1):
                    c1 += labs[i]
                    if not (vals[i] < vals[i + 1]):
                        continue
                    if i + 1 < min_leaf or m - i - 1 < min_leaf:
                        continue
                    c0 = (i + 1.0) - c1
                    wl0 = c0 * cw0
                    wl1 = c1 * cw1
                    wr0 = (n0 - c0) * cw0
                    wr1 = (n1 - c1) * cw1
                    wl = wl0 + wl1
                    wr = wr0 + wr1
                    proxy = (wl0 * wl0 + wl1 * wl1) / wl + (wr0 * wr0 + wr1 * wr1) / wr
                    if j < 0 or proxy > fbest:
                        fbest = proxy
                        j = i
                if j < 0:
                    continue
                thr = 0.5 * (vals[j] + vals[j + 1])
                if thr >= vals[j + 1] or thr < vals[j]:
                    thr = vals[j]
                if fbest > best:
                    best = fbest
                    best_f = f
                    best_t = thr
            if best_f < 0:
                continue
            nl = 0
            for i in range(start, end):
                if Xv[samples[i], best_f] <= best_t:
                    scratch[nl] = samples[i]
                    nl += 1
            j = nl
            for i in range(start, end):
                if not (Xv[samples[i], best_f] <= best_t):
                    scratch[j] = samples[i]
                    j += 1
            for i in range(m):
                samples[start + i] = scratch[i]
            feature[node] = best_f
            threshold[node] = best_t
            stack[5 * sp] = start + nl; stack[5 * sp + 1] = end; stack[5 * sp + 2] = depth + 1
            stack[5 * sp + 3] = node; stack[5 * sp + 4] = 0
            sp += 1
            stack[5 * sp] = start; stack[5 * sp + 1] = start + nl; stack[5 * sp + 2] = depth + 1
            stack[5 * sp + 3] = node; stack[5 * sp + 4] = 1
            sp += 1
    finally:
        free(samples); free(scratch); free(vals); free(labs); free(feats); free(stack)
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


def predict_votes(X, feature, threshold, left, right, value, roots):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef const double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const int[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef const int[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef const unsigned char[::1] vv = np.ascontiguousarray(value, dtype=np.uint8)
    cdef const int64_t[::1] rootv = np.ascontiguousarray(roots, dtype=np.int64)
    cdef Py_ssize_t n = Xv.shape[0], t, r
    cdef int node
    cdef cnp.ndarray[cnp.int64_t, ndim=1] votes = np.zeros(n, dtype=np.int64)
    for r in range(n):
        for t in range(rootv.shape[0]):
            node = <int>rootv[t]
            while fv[node] >= 0:
                if Xv[r, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            votes[r] += vv[node]
    return votes


# ---------------------------------------------------------------------------
# delineation

from libc.math cimport fabs, rint, NAN, isnan


cdef inline double _seqmean(const double* a, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    # mean of a[lo:hi]
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(lo, hi):
        acc = acc + a[k]
    return acc / (hi - lo)


cdef inline Py_ssize_t _walk(const double* absd, Py_ssize_t k, Py_ssize_t step,
                             double thr, Py_ssize_t limit) noexcept nogil:
    while k != limit and absd[k] < thr:
        k += step
    while k != limit and absd[k] >= thr:
        k += step
    return k


def delineate_beats(xq, xs, ds, idx, windows, double p_rel, double t_rel,
                    double noise_thr, double slope_frac):
    """Per-beat fiducials; see ``_kernels_py.delineate_beats``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aq = np.ascontiguousarray(xq, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] as_ = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ad = np.ascontiguousarray(ds, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ai = np.ascontiguousarray(idx, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aabs = np.ascontiguousarray(np.abs(np.gradient(aq)))
    cdef Py_ssize_t w10 = int(windows[0]), w40 = int(windows[1]), w50 = int(windows[2])
    cdef Py_ssize_t w80 = int(windows[3]), w250 = int(windows[4]), w400 = int(windows[5])
    cdef Py_ssize_t n = aq.shape[0], nb = ai.shape[0]
    out_arr = np.full((10, nb), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef const double* q_ = &aq[0]
    cdef const double* s_ = &as_[0]
    cdef const double* d_ = &ad[0]
    cdef const double* absd = &aabs[0]
    cdef const int64_t* ix = <const int64_t*> &ai[0]
    cdef Py_ssize_t i, k, lo, hi, r, qlo, q, shi, s, qrs_on, j, rr, plo, phi, kp, pp, a0, a1
    cdef Py_ssize_t k_up, k_dn, tlo, thi, kt, tp, r0, tw
    cdef Py_ssize_t prev_t_off = -1000000000
    cdef double pol, best, v, thr, r_amp, level, amp, ppol, tpol, d_up, d_dn, on, off
    cdef double p_on, p_peak, p_off, t_peak, t_off
    if n == 0 or nb == 0:
        return out_arr
    with nogil:
        for i in range(nb):
            r0 = ix[i]
            lo = r0 - w50 if r0 - w50 > 0 else 0
            hi = r0 + w50 + 1 if r0 + w50 + 1 < n else n
            r = lo
            best = fabs(q_[lo])
            for k in range(lo + 1, hi):
                if fabs(q_[k]) > best:
                    best = fabs(q_[k])
                    r = k
            pol = 1.0 if q_[r] >= 0 else -1.0
            qlo = r - w80 if r - w80 > 0 else 0
            q = qlo
            best = pol * q_[qlo]
            for k in range(qlo + 1, r + 1):
                if pol * q_[k] < best:
                    best = pol * q_[k]
                    q = k
            shi = r + w80 + 1 if r + w80 + 1 < n else n
            s = r
            best = pol * q_[r]
            for k in range(r + 1, shi):
                if pol * q_[k] < best:
                    best = pol * q_[k]
                    s = k
            best = absd[qlo]
            for k in range(qlo + 1, shi):
                if absd[k] > best:
                    best = absd[k]
            thr = slope_frac * best
            qrs_on = _walk(absd, q, -1, thr, r - 2 * w80 if r - 2 * w80 > 0 else 0)
            j = _walk(absd, s, 1, thr, r + 2 * w80 if r + 2 * w80 < n - 1 else n - 1)
            out[3, i] = qrs_on
            out[4, i] = q
            out[5, i] = r
            out[6, i] = s
            out[7, i] = j
            r_amp = fabs(q_[r] - q_[qrs_on])
            rr = ix[i + 1] - r0 if i + 1 < nb else r0 - ix[i - 1]

            p_on = NAN
            p_peak = NAN
            p_off = NAN
            if i > 0:
                plo = qrs_on - w250
                if prev_t_off + 1 > plo:
                    plo = prev_t_off + 1
                if plo < 0:
                    plo = 0
                phi = qrs_on - w50
                if phi - plo > 3:
                    level = _seqmean(q_, qrs_on - w10 if qrs_on - w10 > 0 else 0, qrs_on + 1)
                    kp = 0
                    best = fabs(s_[plo] - level)
                    for k in range(1, phi + 1 - plo):
                        v = fabs(s_[plo + k] - level)
                        if v > best:
                            best = v
                            kp = k
                    amp = s_[plo + kp] - level
                    thr = p_rel * r_amp if p_rel * r_amp > noise_thr else noise_thr
                    if fabs(amp) >= thr and 0 < kp < phi - plo:
                        pp = plo + kp
                        ppol = 1.0 if amp > 0 else -1.0
                        a0 = pp - w80 if pp - w80 > 0 else 0
                        a1 = pp + w80 if pp + w80 < qrs_on - w10 else qrs_on - w10
                        if a1 < pp + 1:
                            a1 = pp + 1
                        k_up = a0
                        best = ppol * d_[a0]
                        for k in range(a0 + 1, pp + 1):
                            if ppol * d_[k] > best:
                                best = ppol * d_[k]
                                k_up = k
                        k_dn = pp
                        best = ppol * d_[pp]
                        for k in range(pp + 1, a1 + 1):
                            if ppol * d_[k] < best:
                                best = ppol * d_[k]
                                k_dn = k
                        d_up = ppol * d_[k_up]
                        d_dn = ppol * d_[k_dn]
                        if d_up > 0 and d_dn < 0:
                            on = k_up + (0.0 - ppol * (s_[k_up] - level)) / d_up
                            off = k_dn + (0.0 - ppol * (s_[k_dn] - level)) / d_dn
                            p_on = rint(on)
                            if p_on < 0.0:
                                p_on = 0.0
                            if p_on > pp:
                                p_on = pp
                            p_off = rint(off)
                            if p_off < pp:
                                p_off = pp
                            if p_off > qrs_on:
                                p_off = qrs_on
                            p_peak = pp

            t_peak = NAN
            t_off = NAN
            tlo = j + w40
            tw = <Py_ssize_t>(0.6 * rr + 0.5)
            if w400 < tw:
                tw = w400
            thi = j + tw if j + tw < n - 1 else n - 1
            if not isnan(p_off):
                level = _seqmean(q_, <Py_ssize_t>p_off, qrs_on + 1)
            else:
                level = _seqmean(q_, qrs_on - w40 if qrs_on - w40 > 0 else 0, qrs_on + 1)
            if thi - tlo > 3:
                kt = 0
                best = fabs(s_[tlo] - level)
                for k in range(1, thi + 1 - tlo):
                    v = fabs(s_[tlo + k] - level)
                    if v > best:
                        best = v
                        kt = k
                amp = s_[tlo + kt] - level
                thr = t_rel * r_amp if t_rel * r_amp > noise_thr else noise_thr
                if fabs(amp) >= thr and kt < thi - tlo:
                    tp = tlo + kt
                    tpol = 1.0 if amp > 0 else -1.0
                    k_dn = tp
                    best = tpol * d_[tp]
                    for k in range(tp + 1, thi + 1):
                        if tpol * d_[k] < best:
                            best = tpol * d_[k]
                            k_dn = k
                    d_dn = tpol * d_[k_dn]
                    if d_dn < 0:
                        off = k_dn + (0.0 - tpol * (s_[k_dn] - level)) / d_dn
                        t_peak = tp
                        t_off = rint(off)
                        if t_off < tp:
                            t_off = tp
                        if t_off > thi:
                            t_off = thi
            if not isnan(t_off):
                prev_t_off = <Py_ssize_t>t_off
            if 0 < i < nb - 1:
                out[0, i] = p_on
                out[1, i] = p_peak
                out[2, i] = p_off
                out[8, i] = t_peak
                out[9, i] = t_off
    return out_arr
