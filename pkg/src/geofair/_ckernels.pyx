# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same contracts."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, NAN

cnp.import_array()


def bfs_distances(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices, int horizon):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full((n, n), -1, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] dist = dist_arr
    cdef cnp.int64_t[::1] queue = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t src, head, tail, e
    cdef cnp.int64_t u, v
    cdef cnp.int32_t du
    with nogil:
        for src in range(n):
            dist[src, src] = 0
            queue[0] = src
            head = 0
            tail = 1
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[src, u]
                if du >= horizon:
                    continue
                for e in range(indptr[u], indptr[u + 1]):
                    v = indices[e]
                    if dist[src, v] < 0:
                        dist[src, v] = du + 1
                        queue[tail] = v
                        tail += 1
    return dist_arr


def smooth(const cnp.int32_t[:, ::1] dist, const double[::1] values,
           const cnp.uint8_t[::1] present, const double[::1] multipliers,
           double p, int m):
    cdef Py_ssize_t n = dist.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cnt_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef cnp.int64_t[::1] cnt = cnt_arr
    # kernel lookup: weight only depends on the hop count
    cdef double[::1] kern = np.empty(m + 1, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef int d
    cdef double num, den, w, ref
    cdef bint have_ref
    for d in range(m + 1):
        kern[d] = pow(1.0 + d, -p)
    with nogil:
        for i in range(n):
            num = 0.0
            den = 0.0
            # deviations from a reference keep constant fields exact
            have_ref = present[i]
            ref = values[i] if have_ref else 0.0
            for j in range(n):
                d = dist[i, j]
                if d < 0 or d > m or not present[j]:
                    continue
                if not have_ref:
                    ref = values[j]
                    have_ref = True
                w = kern[d] * multipliers[j]
                num += w * (values[j] - ref)
                den += w
                cnt[i] += 1
            out[i] = ref + num / den if den > 0 else NAN
    return out_arr, cnt_arr


def plugin_argmax(const double[:, ::1] scores, const double[::1] row_scale,
                  const cnp.int64_t[::1] row_group, const double[:, ::1] offsets):
    cdef Py_ssize_t n = scores.shape[0], k = scores.shape[1]
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, c, best
    cdef double v, top
    with nogil:
        for i in range(n):
            best = 0
            top = row_scale[i] * scores[i, 0] - offsets[row_group[i], 0]
            for c in range(1, k):
                v = row_scale[i] * scores[i, c] - offsets[row_group[i], c]
                if v > top:
                    top = v
                    best = c
            out[i] = best
    return out_arr


def confusion_counts(const cnp.int64_t[::1] y, const cnp.int64_t[::1] y_hat,
                     const cnp.int64_t[::1] group, int n_classes, int n_groups):
    counts_arr = np.zeros((n_groups, n_classes, n_classes), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] counts = counts_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(y.shape[0]):
            counts[group[i], y[i], y_hat[i]] += 1
    return counts_arr
