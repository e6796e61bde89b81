"""Slow, obviously-correct reference implementations.

These back the verification suites and the test oracles. They share no code
with the production paths: convolutions are written as literal per-edge sums,
the LIF trace scans the whole output grid per event, and gradients come from
central finite differences.
"""

import math

import numpy as np


def direct_conv(nt, features, params):
    """Per-edge, per-basis transcription of the convolution sum."""
    nb = nt.structure
    out = np.zeros((nb.num_out, params.num_out_channels))
    for m in range(nt.num_basis):
        theta = params.theta[m]
        for e in range(nb.num_edges):
            i = nb.out_idx[e]
            j = nb.in_idx[e]
            out[i] += nt.values[e, m] * (features[j] @ theta)
    return out


def direct_featureless(nt, params):
    """Per-edge transcription of the featureless convolution."""
    nb = nt.structure
    sums = np.zeros((nb.num_out, nt.num_basis))
    for e in range(nb.num_edges):
        sums[nb.out_idx[e]] += nt.values[e]
    return sums @ params.phi


def direct_event_conv(edges, features, params):
    """Per-edge, per-decay-index transcription of the event convolution."""
    out = np.zeros((edges.num_out, params.num_out_channels))
    for e in range(edges.num_edges):
        i = edges.out_idx[e]
        j = edges.in_idx[e]
        u = edges.offset_idx[e]
        for v in range(params.m_v):
            w = math.exp(-params.lam[u, v] * edges.dt[e])
            out[i] += w * (features[j] @ params.theta[u, v])
    return out


def event_edges_oracle(input_stream, output_stream, window, stride, t_tilde,
                       crop_window=None):
    """All-pairs filter over (output, input) event pairs.

    Returns the set of (i, j, u, dt) tuples that satisfy the window, time
    order and crop rules.
    """
    win_h, win_w = window
    anchor_y, anchor_x = win_h // 2, win_w // 2
    found = set()
    for i in range(output_stream.num_events):
        for j in range(input_stream.num_events):
            if input_stream.times[j] > output_stream.times[i]:
                continue
            dy = input_stream.ys[j] - (stride * output_stream.ys[i] - anchor_y)
            dx = input_stream.xs[j] - (stride * output_stream.xs[i] - anchor_x)
            if not (0 <= dy < win_h and 0 <= dx < win_w):
                continue
            dt = (output_stream.times[i] - input_stream.times[j]) / t_tilde
            if crop_window is not None and dt > crop_window:
                continue
            found.add((i, j, int(dy * win_w + dx), float(dt)))
    return found


def lif_reference(stream, cfg):
    """Full-grid LIF trace with dict-held neuron state.

    For every event it scans every output pixel and tests window containment
    directly; slow but structurally independent of the production scan.
    """
    height, width = stream.grid
    h_out = -(-height // cfg.stride)
    w_out = -(-width // cfg.stride)
    win_h, win_w = cfg.window
    anchor_y, anchor_x = win_h // 2, win_w // 2
    state = {}
    fired = []
    for ev in range(stream.num_events):
        t = stream.times[ev]
        x = int(stream.xs[ev])
        y = int(stream.ys[ev])
        field = []
        for oy in range(h_out):
            dy = y - (oy * cfg.stride - anchor_y)
            if not 0 <= dy < win_h:
                continue
            for ox in range(w_out):
                dx = x - (ox * cfg.stride - anchor_x)
                if 0 <= dx < win_w:
                    field.append((oy, ox))
        if not field:
            continue
        inc = 1.0 / len(field)
        for oy, ox in field:
            volt, last = state.get((oy, ox), (0.0, 0.0))
            v = volt * math.exp(-(t - last) / cfg.t_tilde) + inc
            if v > cfg.v_thresh:
                v = cfg.v_reset
                fired.append((t, ox, oy))
            state[(oy, ox)] = (v, t)
    return fired


def knn_reference(source, queries, k):
    """Per-query full sort by (distance, index); rows re-sorted by index."""
    rows = []
    for qi in range(queries.size):
        d = np.linalg.norm(source.coords - queries.coords[qi], axis=1)
        chosen = sorted(range(source.size), key=lambda j: (d[j], j))[:k]
        rows.append(sorted(chosen))
    return rows


def greedy_farthest_reference(coords, count):
    """Literal greedy farthest-point ordering over a dense distance matrix."""
    n = coords.shape[0]
    d = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
    best = [math.inf] * n
    picked = []
    for _ in range(count):
        candidates = [i for i in range(n) if i not in picked]
        j = max(candidates, key=lambda i: (best[i], -i))
        picked.append(j)
        for i in range(n):
            best[i] = min(best[i], d[i, j])
    return picked


def numerical_gradient(loss, x, step=1e-4):
    """Central finite differences of a scalar loss, coordinate by coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    base = x.copy().reshape(-1)
    for k in range(base.shape[0]):
        saved = base[k]
        base[k] = saved + step
        hi = loss(base.reshape(x.shape))
        base[k] = saved - step
        lo = loss(base.reshape(x.shape))
        base[k] = saved
        flat[k] = (hi - lo) / (2 * step)
    return grad


def max_rel_err(actual, expected):
    """Largest difference relative to the largest-magnitude expected value."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.size == 0:
        return 0.0
    diff = np.abs(actual - expected).max()
    if diff == 0.0:
        return 0.0
    scale = max(np.abs(expected).max(), np.finfo(np.float64).tiny)
    return float(diff / scale)
