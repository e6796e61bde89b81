"""Constant-memory streaming twin of the batch event convolution.

Every pixel keeps one decayed feature sum per (spatial offset, decay index)
pair plus a single last-update time. Input events fold into those sums in
O(M_u M_v Q); output features are read back in O(M_u M_v Q P) without
mutating anything. Interleaved over a sorted stream this reproduces the batch
path exactly (up to reassociation rounding): the recursion telescopes the
per-edge decays into the same sums.
"""

import numpy as np

from .events import build_event_edges, event_conv_forward, output_grid


class StreamState:
    """Per-pixel decayed feature sums and last-update times.

    Memory is exactly H * W * (M_u * M_v * Q + 1) reals regardless of how many
    events have been processed.
    """

    __slots__ = ("grid", "params", "z", "tau")

    def __init__(self, grid, params):
        height, width = int(grid[0]), int(grid[1])
        if height < 1 or width < 1:
            raise ValueError("grid dimensions must be positive")
        self.grid = (height, width)
        self.params = params
        self.z = np.zeros((height, width, params.m_u, params.m_v,
                           params.num_in_channels))
        self.tau = np.zeros((height, width))

    @property
    def num_reals(self):
        return self.z.size + self.tau.size


def stream_init(grid, params):
    """Fresh all-zero state for an input grid."""
    return StreamState(grid, params)


def stream_on_input(state, t, x, y, features):
    """Fold one input event into its pixel's decayed sums.

    Events must arrive in non-decreasing time order per pixel.
    """
    height, width = state.grid
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"pixel ({x}, {y}) outside grid {state.grid}")
    elapsed = t - state.tau[y, x]
    if elapsed < 0:
        raise ValueError(f"event at t={t} precedes pixel time {state.tau[y, x]}")
    features = np.asarray(features, dtype=np.float64)
    decay = np.exp(-state.params.lam * (elapsed / state.params.t_tilde))
    state.z[y, x] *= decay[:, :, None]
    state.z[y, x] += features
    state.tau[y, x] = t


def stream_query_output(state, t, x, y):
    """Features of an output event at (t, x, y); pure, never mutates state.

    Decays each receptive-field pixel's sums to the query time and applies the
    corresponding parameter blocks. Off-grid pixels contribute zero.
    """
    params = state.params
    height, width = state.grid
    grid_out = output_grid(state.grid, params.stride)
    if not (0 <= x < grid_out[1] and 0 <= y < grid_out[0]):
        raise ValueError(f"output pixel ({x}, {y}) outside grid {grid_out}")
    anchor_y, anchor_x = params.anchor
    win_h, win_w = params.window
    out = np.zeros(params.num_out_channels)
    for dy in range(win_h):
        py = params.stride * y + dy - anchor_y
        if py < 0 or py >= height:
            continue
        for dx in range(win_w):
            px = params.stride * x + dx - anchor_x
            if px < 0 or px >= width:
                continue
            elapsed = t - state.tau[py, px]
            if elapsed < 0:
                raise ValueError(f"query at t={t} precedes pixel time "
                                 f"{state.tau[py, px]}")
            u = dy * win_w + dx
            decay = np.exp(-params.lam[u] * (elapsed / params.t_tilde))
            out += np.einsum("v,vq,vqp->p", decay, state.z[py, px, u],
                             params.theta[u])
    return out


def run_streaming(input_stream, output_stream, params):
    """Feature matrix for every output event via the streaming path.

    Both streams are walked in global time order; input events at a given
    time are folded in before any output at that time is queried, matching
    the batch path's inclusive ``t_j <= t_i`` edge rule.
    """
    if input_stream.features is None:
        raise ValueError("input stream must carry features")
    state = stream_init(input_stream.grid, params)
    out = np.zeros((output_stream.num_events, params.num_out_channels))
    next_in = 0
    n_in = input_stream.num_events
    for i in range(output_stream.num_events):
        t_out = output_stream.times[i]
        while next_in < n_in and input_stream.times[next_in] <= t_out:
            stream_on_input(state, input_stream.times[next_in],
                            int(input_stream.xs[next_in]),
                            int(input_stream.ys[next_in]),
                            input_stream.features[next_in])
            next_in += 1
        out[i] = stream_query_output(state, t_out, int(output_stream.xs[i]),
                                     int(output_stream.ys[i]))
    return out


def dual_equivalence_check(input_stream, output_stream, params):
    """Max discrepancy between the batch and streaming paths.

    Runs the uncropped batch convolution and the interleaved streaming pass
    over the same streams and returns the largest per-feature difference
    relative to the largest-magnitude batch feature (0 when both are empty).
    """
    edges = build_event_edges(input_stream, output_stream, params.window,
                              params.stride, params.t_tilde, crop_window=None)
    reference = event_conv_forward(edges, input_stream.features, params)
    streamed = run_streaming(input_stream, output_stream, params)
    if reference.size == 0:
        return 0.0
    scale = np.abs(reference).max()
    diff = np.abs(streamed - reference).max()
    if diff == 0.0:
        return 0.0
    return float(diff / max(scale, np.finfo(np.float64).tiny))
