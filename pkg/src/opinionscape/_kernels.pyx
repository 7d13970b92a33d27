# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Contracts mirror ``_fallback.py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF MAX_PASSES = 200


def expand_pairs(const cnp.int64_t[::1] tag_ptr, const cnp.int32_t[::1] tag_idx,
                 const cnp.int32_t[::1] users):
    cdef Py_ssize_t n = tag_ptr.shape[0] - 1
    cdef Py_ssize_t r, i, j, s, e, total = 0, pos = 0
    cdef cnp.int64_t width
    cdef cnp.int32_t x, y, u
    for r in range(n):
        width = tag_ptr[r + 1] - tag_ptr[r]
        if width > 1:
            total += width * (width - 1) // 2
    a_arr = np.empty(total, dtype=np.int32)
    b_arr = np.empty(total, dtype=np.int32)
    u_arr = np.empty(total, dtype=np.int32)
    cdef cnp.int32_t[::1] a = a_arr
    cdef cnp.int32_t[::1] b = b_arr
    cdef cnp.int32_t[::1] uo = u_arr
    with nogil:
        for r in range(n):
            s = tag_ptr[r]
            e = tag_ptr[r + 1]
            if e - s < 2:
                continue
            u = users[r]
            for i in range(s, e):
                x = tag_idx[i]
                for j in range(i + 1, e):
                    y = tag_idx[j]
                    if x < y:
                        a[pos] = x
                        b[pos] = y
                    else:
                        a[pos] = y
                        b[pos] = x
                    uo[pos] = u
                    pos += 1
    return a_arr, b_arr, u_arr


def core_numbers(const cnp.int64_t[::1] indptr, const cnp.int32_t[::1] indices):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    if n == 0:
        return np.zeros(0, dtype=np.int32)
    deg_arr = np.diff(np.asarray(indptr)).astype(np.int32)
    cdef cnp.int32_t[::1] deg = deg_arr
    cdef cnp.int32_t md = deg_arr.max()
    bin_arr = np.zeros(md + 1, dtype=np.int32)
    pos_arr = np.empty(n, dtype=np.int32)
    vert_arr = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] bins = bin_arr
    cdef cnp.int32_t[::1] pos = pos_arr
    cdef cnp.int32_t[::1] vert = vert_arr
    cdef Py_ssize_t v, i, k
    cdef cnp.int32_t d, num, start = 0, dv, du, pu, pw, w, u
    with nogil:
        for v in range(n):
            bins[deg[v]] += 1
        for d in range(md + 1):
            num = bins[d]
            bins[d] = start
            start += num
        for v in range(n):
            pos[v] = bins[deg[v]]
            vert[pos[v]] = <cnp.int32_t>v
            bins[deg[v]] += 1
        d = md
        while d > 0:
            bins[d] = bins[d - 1]
            d -= 1
        bins[0] = 0
        for i in range(n):
            v = vert[i]
            dv = deg[v]
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                du = deg[u]
                if du > dv:
                    pu = pos[u]
                    pw = bins[du]
                    w = vert[pw]
                    if u != w:
                        pos[u] = pw
                        vert[pu] = w
                        pos[w] = pu
                        vert[pw] = u
                    bins[du] += 1
                    deg[u] = du - 1
    return deg_arr


def local_moving(const cnp.int64_t[::1] indptr, const cnp.int32_t[::1] indices,
                 const double[::1] weights, const double[::1] strength,
                 const cnp.int64_t[::1] order, cnp.int64_t[::1] community,
                 double m2, double resolution, double tol):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    tot_arr = np.zeros(n, dtype=np.float64)
    link_arr = np.zeros(n, dtype=np.float64)
    seen_arr = np.zeros(n, dtype=np.uint8)
    touched_arr = np.empty(n + 1, dtype=np.int64)
    cdef double[::1] tot = tot_arr
    cdef double[::1] link = link_arr
    cdef cnp.uint8_t[::1] seen = seen_arr
    cdef cnp.int64_t[::1] touched = touched_arr
    cdef Py_ssize_t v, e, idx, t, nt, passes
    cdef cnp.int64_t cv, c, best, u
    cdef double kv, gain, best_gain
    cdef long moves = 0, moved
    with nogil:
        for v in range(n):
            tot[community[v]] += strength[v]
        for passes in range(MAX_PASSES):
            moved = 0
            for idx in range(order.shape[0]):
                v = order[idx]
                cv = community[v]
                kv = strength[v]
                nt = 0
                for e in range(indptr[v], indptr[v + 1]):
                    u = indices[e]
                    if u == v:
                        continue
                    c = community[u]
                    if not seen[c]:
                        seen[c] = 1
                        link[c] = 0.0
                        touched[nt] = c
                        nt += 1
                    link[c] += weights[e]
                tot[cv] -= kv
                best = cv
                if seen[cv]:
                    best_gain = link[cv] - resolution * kv * tot[cv] / m2
                else:
                    best_gain = -resolution * kv * tot[cv] / m2
                for t in range(nt):
                    c = touched[t]
                    gain = link[c] - resolution * kv * tot[c] / m2
                    if gain > best_gain + tol:
                        best = c
                        best_gain = gain
                for t in range(nt):
                    seen[touched[t]] = 0
                tot[best] += kv
                if best != cv:
                    community[v] = best
                    moved += 1
            moves += moved
            if moved == 0:
                break
    return moves


def deviation_norms(const cnp.int64_t[::1] indptr, const cnp.int32_t[::1] indices,
                    const double[::1] freqs, const double[::1] reference):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t nt = reference.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    mark_arr = np.zeros(nt, dtype=np.uint8)
    cdef double[::1] out = out_arr
    cdef cnp.uint8_t[::1] mark = mark_arr
    cdef Py_ssize_t r, k, j
    cdef double acc, diff
    with nogil:
        for r in range(n):
            acc = 0.0
            for k in range(indptr[r], indptr[r + 1]):
                j = indices[k]
                mark[j] = 1
            for j in range(nt):
                if not mark[j]:
                    acc += reference[j] * reference[j]
            for k in range(indptr[r], indptr[r + 1]):
                j = indices[k]
                diff = freqs[k] - reference[j]
                acc += diff * diff
                mark[j] = 0
            out[r] = acc ** 0.5
    return out_arr
