"""Pure-NumPy twin of the compiled kernels in ``_core``.

Used when the extension is unavailable or when ``CDCONV_BACKEND=python``
forces it. The two implementations must agree on every input; the compiled
core accumulates strictly in edge order while this module uses deterministic
segmented reductions, so cross-backend results match to rounding only.
"""

import itertools
import math

import numpy as np


def edge_accumulate(out, dst, src_idx, weights, src):
    """out[dst[e]] += weights[e] * src[src_idx[e]] for every edge e."""
    n_edges = dst.shape[0]
    if n_edges == 0:
        return
    vals = src[src_idx] * weights[:, None]
    if np.any(dst[1:] < dst[:-1]):
        order = np.argsort(dst, kind="stable")
        dst = dst[order]
        vals = vals[order]
    starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
    sums = np.add.reduceat(vals, starts, axis=0)
    out[dst[starts]] += sums


def grid_ball_query(coords, point_ids, cell_keys, cell_starts, mins, dims,
                    strides, cell_size, queries, radius):
    """Closed-ball neighbor query against a packed uniform grid.

    Returns (out_idx, in_idx) in canonical order: ascending query index,
    ascending point index within each query.
    """
    r2 = radius * radius
    out_i = []
    out_j = []
    n_cells = cell_keys.shape[0]
    for qi in range(queries.shape[0]):
        q = queries[qi]
        lo = np.floor((q - radius) / cell_size).astype(np.int64) - mins
        hi = np.floor((q + radius) / cell_size).astype(np.int64) - mins
        np.maximum(lo, 0, out=lo)
        np.minimum(hi, dims - 1, out=hi)
        if np.any(lo > hi):
            continue
        chunks = []
        for cell in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
            key = int(np.dot(cell, strides))
            pos = np.searchsorted(cell_keys, key)
            if pos < n_cells and cell_keys[pos] == key:
                chunks.append(point_ids[cell_starts[pos]:cell_starts[pos + 1]])
        if not chunks:
            continue
        cand = np.concatenate(chunks)
        d2 = ((coords[cand] - q) ** 2).sum(axis=1)
        hits = cand[d2 <= r2]
        if hits.size:
            hits = np.sort(hits)
            out_i.append(np.full(hits.size, qi, dtype=np.int64))
            out_j.append(hits)
    if not out_i:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    return np.concatenate(out_i), np.concatenate(out_j)


def lif_scan(times, xs, ys, height, width, win_h, win_w, stride, t_tilde,
             v_thresh, v_reset):
    """Leaky integrate-and-fire scan over a time-sorted event sequence.

    Each input event raises the potential of every output neuron whose
    receptive field contains it by 1/n (n = actual field size after boundary
    truncation); potentials decay exponentially between touches and reset on
    crossing the threshold, emitting an output event at the input time.
    """
    h_out = (height + stride - 1) // stride
    w_out = (width + stride - 1) // stride
    anchor_y = win_h // 2
    anchor_x = win_w // 2
    potential = np.zeros((h_out, w_out))
    last_t = np.zeros((h_out, w_out))
    out_t = []
    out_x = []
    out_y = []
    for ev in range(times.shape[0]):
        t = times[ev]
        x = int(xs[ev])
        y = int(ys[ev])
        field = []
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
                field.append((oy, ox))
        if not field:
            continue
        inc = 1.0 / len(field)
        for oy, ox in field:
            v = potential[oy, ox] * math.exp(-(t - last_t[oy, ox]) / t_tilde) + inc
            if v > v_thresh:
                v = v_reset
                out_t.append(t)
                out_x.append(ox)
                out_y.append(oy)
            potential[oy, ox] = v
            last_t[oy, ox] = t
    return (np.asarray(out_t, dtype=np.float64),
            np.asarray(out_x, dtype=np.int64),
            np.asarray(out_y, dtype=np.int64))
