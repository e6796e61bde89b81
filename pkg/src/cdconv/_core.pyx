# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot kernels: edge accumulation, grid ball queries, LIF scan.

Semantics are defined by the NumPy twin in ``_kernels_py``; the test suite
checks both backends against each other.
"""

from libcpp.vector cimport vector
from libcpp.algorithm cimport sort as cpp_sort
from libc.math cimport floor as c_floor, exp as c_exp

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def edge_accumulate(double[:, ::1] out, const i64[::1] dst, const i64[::1] src_idx,
                    const double[::1] weights, const double[:, ::1] src):
    """out[dst[e]] += weights[e] * src[src_idx[e]], strictly in edge order."""
    cdef Py_ssize_t e, c
    cdef Py_ssize_t n_edges = dst.shape[0]
    cdef Py_ssize_t n_cols = out.shape[1]
    cdef double w
    cdef i64 d, s
    with nogil:
        for e in range(n_edges):
            d = dst[e]
            s = src_idx[e]
            w = weights[e]
            for c in range(n_cols):
                out[d, c] += w * src[s, c]


cdef inline Py_ssize_t _find_cell(const i64[::1] keys, i64 key) nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = keys.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys.shape[0] and keys[lo] == key:
        return lo
    return -1


def grid_ball_query(const double[:, ::1] coords, const i64[::1] point_ids, const i64[::1] cell_keys,
                    const i64[::1] cell_starts, const i64[::1] mins, const i64[::1] dims,
                    const i64[::1] strides, double cell_size, const double[:, ::1] queries,
                    double radius):
    """Closed-ball query against a packed uniform grid; canonical edge order."""
    cdef Py_ssize_t n_queries = queries.shape[0]
    cdef Py_ssize_t n_dim = queries.shape[1]
    cdef double r2 = radius * radius
    cdef vector[i64] out_i, out_j, cand
    cdef i64[::1] lo = np.empty(n_dim, dtype=np.int64)
    cdef i64[::1] hi = np.empty(n_dim, dtype=np.int64)
    cdef i64[::1] cur = np.empty(n_dim, dtype=np.int64)
    cdef Py_ssize_t qi, d, pos, idx, k
    cdef i64 key, p, v
    cdef double dist2, diff
    cdef bint empty_box
    with nogil:
        for qi in range(n_queries):
            empty_box = False
            for d in range(n_dim):
                lo[d] = <i64>c_floor((queries[qi, d] - radius) / cell_size) - mins[d]
                hi[d] = <i64>c_floor((queries[qi, d] + radius) / cell_size) - mins[d]
                if lo[d] < 0:
                    lo[d] = 0
                if hi[d] > dims[d] - 1:
                    hi[d] = dims[d] - 1
                if lo[d] > hi[d]:
                    empty_box = True
                    break
            if empty_box:
                continue
            cand.clear()
            for d in range(n_dim):
                cur[d] = lo[d]
            while True:
                key = 0
                for d in range(n_dim):
                    key += cur[d] * strides[d]
                pos = _find_cell(cell_keys, key)
                if pos >= 0:
                    for idx in range(cell_starts[pos], cell_starts[pos + 1]):
                        p = point_ids[idx]
                        dist2 = 0.0
                        for d in range(n_dim):
                            diff = queries[qi, d] - coords[p, d]
                            dist2 += diff * diff
                        if dist2 <= r2:
                            cand.push_back(p)
                d = n_dim - 1
                while d >= 0:
                    cur[d] += 1
                    if cur[d] <= hi[d]:
                        break
                    cur[d] = lo[d]
                    d -= 1
                if d < 0:
                    break
            if cand.size() > 0:
                cpp_sort(cand.begin(), cand.end())
                for k in range(<Py_ssize_t>cand.size()):
                    out_i.push_back(qi)
                    out_j.push_back(cand[k])
    res_i = np.empty(out_i.size(), dtype=np.int64)
    res_j = np.empty(out_j.size(), dtype=np.int64)
    cdef i64[::1] vi = res_i
    cdef i64[::1] vj = res_j
    for k in range(<Py_ssize_t>out_i.size()):
        vi[k] = out_i[k]
        vj[k] = out_j[k]
    return res_i, res_j


def lif_scan(const double[::1] times, const i64[::1] xs, const i64[::1] ys, i64 height, i64 width,
             i64 win_h, i64 win_w, i64 stride, double t_tilde, double v_thresh,
             double v_reset):
    """Leaky integrate-and-fire scan; see the NumPy twin for the contract."""
    cdef i64 h_out = (height + stride - 1) // stride
    cdef i64 w_out = (width + stride - 1) // stride
    cdef i64 anchor_y = win_h // 2
    cdef i64 anchor_x = win_w // 2
    potential_arr = np.zeros((h_out, w_out))
    last_t_arr = np.zeros((h_out, w_out))
    cdef double[:, ::1] potential = potential_arr
    cdef double[:, ::1] last_t = last_t_arr
    cdef vector[double] out_t
    cdef vector[i64] out_x, out_y
    cdef i64[::1] field_y = np.empty(win_h * win_w, dtype=np.int64)
    cdef i64[::1] field_x = np.empty(win_h * win_w, dtype=np.int64)
    cdef Py_ssize_t ev, k
    cdef i64 x, y, dy, dx, num_y, num_x, oy, ox, n
    cdef double t, v, inc
    with nogil:
        for ev in range(times.shape[0]):
            t = times[ev]
            x = xs[ev]
            y = ys[ev]
            n = 0
            for dy in range(win_h - 1, -1, -1):
                num_y = y + anchor_y - dy
                if num_y < 0 or num_y % stride:
                    continue
                oy = num_y // stride
                if oy >= h_out:
                    continue
                for dx in range(win_w - 1, -1, -1):
                    num_x = x + anchor_x - dx
                    if num_x < 0 or num_x % stride:
                        continue
                    ox = num_x // stride
                    if ox >= w_out:
                        continue
                    field_y[n] = oy
                    field_x[n] = ox
                    n += 1
            if n == 0:
                continue
            inc = 1.0 / n
            for k in range(n):
                oy = field_y[k]
                ox = field_x[k]
                v = potential[oy, ox] * c_exp(-(t - last_t[oy, ox]) / t_tilde) + inc
                if v > v_thresh:
                    v = v_reset
                    out_t.push_back(t)
                    out_x.push_back(ox)
                    out_y.push_back(oy)
                potential[oy, ox] = v
                last_t[oy, ox] = t
    res_t = np.empty(out_t.size(), dtype=np.float64)
    res_x = np.empty(out_x.size(), dtype=np.int64)
    res_y = np.empty(out_y.size(), dtype=np.int64)
    cdef double[::1] vt = res_t
    cdef i64[::1] vx = res_x
    cdef i64[::1] vy = res_y
    for k in range(<Py_ssize_t>out_t.size()):
        vt[k] = out_t[k]
        vx[k] = out_x[k]
        vy[k] = out_y[k]
    return res_t, res_x, res_y
