"""Event streams on pixel grids and the batch event-convolution path.

Events are time-sorted points on a fixed H x W grid. Convolutions look over a
small spatial window and backwards in time only, with an exponentially
decaying kernel per (spatial offset, decay index) pair, so every edge stores
a non-negative time difference pre-scaled by the decay time. The batch path
here is the training-side implementation; ``streaming`` holds its constant-
memory twin.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .geometry import Neighborhood
from .kernels import NeighborhoodTensor


class EventStream:
    """Time-sorted events on a fixed pixel grid.

    Raw camera streams carry a polarity bit per event; processed streams
    carry a feature row per event. Timestamps are kept as float64 in memory
    (the event-file format is integer microseconds on the wire).
    """

    __slots__ = ("grid", "times", "xs", "ys", "features", "polarity")

    def __init__(self, grid, times, xs, ys, features=None, polarity=None):
        height, width = int(grid[0]), int(grid[1])
        if height < 1 or width < 1:
            raise ValueError("grid dimensions must be positive")
        times = np.ascontiguousarray(times, dtype=np.float64)
        xs = np.ascontiguousarray(xs, dtype=np.int64)
        ys = np.ascontiguousarray(ys, dtype=np.int64)
        if times.ndim != 1 or xs.shape != times.shape or ys.shape != times.shape:
            raise ValueError("times, xs and ys must be equal-length 1-D arrays")
        if times.size:
            if not np.isfinite(times).all() or times.min() < 0:
                raise ValueError("timestamps must be finite and non-negative")
            if np.any(times[1:] < times[:-1]):
                raise ValueError("events must be time-sorted")
            if xs.min() < 0 or xs.max() >= width or ys.min() < 0 or ys.max() >= height:
                raise ValueError("event pixel outside the grid")
        if features is not None:
            features = np.ascontiguousarray(features, dtype=np.float64)
            if features.ndim != 2 or features.shape[0] != times.shape[0]:
                raise ValueError("features must have one row per event")
            if features.size and not np.isfinite(features).all():
                raise ValueError("features must be finite")
            features.setflags(write=False)
        if polarity is not None:
            polarity = np.ascontiguousarray(polarity, dtype=np.int64)
            if polarity.shape != times.shape:
                raise ValueError("polarity must have one entry per event")
            if polarity.size and not np.isin(polarity, (0, 1)).all():
                raise ValueError("polarity must be 0 or 1")
            polarity.setflags(write=False)
        for arr in (times, xs, ys):
            arr.setflags(write=False)
        self.grid = (height, width)
        self.times = times
        self.xs = xs
        self.ys = ys
        self.features = features
        self.polarity = polarity

    @property
    def num_events(self):
        return self.times.shape[0]

    def __len__(self):
        return self.times.shape[0]

    def __repr__(self):
        return f"EventStream(grid={self.grid}, num_events={self.num_events})"


def polarity_features(stream):
    """Lift a raw polarity stream to two one-hot feature channels.

    Channel 0 marks positive events, channel 1 negative ones.
    """
    if stream.polarity is None:
        raise ValueError("stream has no polarity channel")
    feats = np.zeros((stream.num_events, 2))
    feats[stream.polarity == 1, 0] = 1.0
    feats[stream.polarity == 0, 1] = 1.0
    return EventStream(stream.grid, stream.times, stream.xs, stream.ys,
                       features=feats)


def output_grid(grid, stride):
    """Grid of the stride-mapped output stream (output x' centers stride*x')."""
    height, width = grid
    return (-(-height // stride), -(-width // stride))


@dataclass(frozen=True)
class LIFConfig:
    """Leaky integrate-and-fire subsampler configuration.

    ``window``/``stride`` define the receptive field and the output grid;
    potentials decay with time constant ``t_tilde`` and reset to ``v_reset``
    on crossing ``v_thresh``.
    """

    window: tuple
    stride: int
    t_tilde: float
    v_thresh: float
    v_reset: float

    def __post_init__(self):
        if len(self.window) != 2 or min(self.window) < 1:
            raise ValueError("window must be (h, w) with positive entries")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.t_tilde > 0:
            raise ValueError("t_tilde must be positive")
        if not self.v_thresh > 0:
            raise ValueError("v_thresh must be positive")


def lif_subsample(stream, cfg):
    """Run the LIF subsampler over a stream; emits on the strided grid.

    Input polarity/features are ignored: only times and pixels drive the
    neurons, and output events carry neither.
    """
    kern = backend.active()
    out_t, out_x, out_y = kern.lif_scan(
        stream.times, stream.xs, stream.ys, stream.grid[0], stream.grid[1],
        int(cfg.window[0]), int(cfg.window[1]), int(cfg.stride),
        float(cfg.t_tilde), float(cfg.v_thresh), float(cfg.v_reset))
    return EventStream(output_grid(stream.grid, cfg.stride), out_t, out_x, out_y)


class EventKernelParams:
    """Learned event-convolution kernel.

    ``lam[u, v] > 0`` is the temporal decay rate (per unit of scaled time) and
    ``theta[u, v]`` the Q x P block for spatial offset u (row-major over the
    window) and decay index v. ``t_tilde`` scales time differences before any
    decay math.
    """

    __slots__ = ("window", "stride", "t_tilde", "lam", "theta")

    def __init__(self, window, stride, t_tilde, lam, theta):
        window = (int(window[0]), int(window[1]))
        if min(window) < 1:
            raise ValueError("window must have positive entries")
        if stride < 1:
            raise ValueError("stride must be >= 1")
        if not t_tilde > 0:
            raise ValueError("t_tilde must be positive")
        lam = np.ascontiguousarray(lam, dtype=np.float64)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        m_u = window[0] * window[1]
        if lam.shape != (m_u, theta.shape[1]) or theta.ndim != 4:
            raise ValueError("lam must be M_u x M_v and theta M_u x M_v x Q x P")
        if theta.shape[0] != m_u:
            raise ValueError(f"theta has {theta.shape[0]} spatial blocks, "
                             f"window implies {m_u}")
        if not np.isfinite(lam).all() or np.any(lam <= 0):
            raise ValueError("decay rates must be finite and positive")
        if theta.size and not np.isfinite(theta).all():
            raise ValueError("theta must be finite")
        lam.setflags(write=False)
        theta.setflags(write=False)
        self.window = window
        self.stride = int(stride)
        self.t_tilde = float(t_tilde)
        self.lam = lam
        self.theta = theta

    @property
    def m_u(self):
        return self.window[0] * self.window[1]

    @property
    def m_v(self):
        return self.lam.shape[1]

    @property
    def num_in_channels(self):
        return self.theta.shape[2]

    @property
    def num_out_channels(self):
        return self.theta.shape[3]

    @property
    def anchor(self):
        return (self.window[0] // 2, self.window[1] // 2)


class EventEdgeSet:
    """Edges between an output and an input event stream.

    Each edge stores the flattened spatial offset ``u`` of the input pixel
    within the output event's window and the scaled, non-negative time
    difference. Edges are grouped by output event, ascending input event
    within a group.
    """

    __slots__ = ("num_out", "num_in", "out_idx", "in_idx", "offset_idx", "dt",
                 "crop_window", "_row_splits", "_by_offset")

    def __init__(self, num_out, num_in, out_idx, in_idx, offset_idx, dt,
                 crop_window=None):
        out_idx = np.ascontiguousarray(out_idx, dtype=np.int64)
        in_idx = np.ascontiguousarray(in_idx, dtype=np.int64)
        offset_idx = np.ascontiguousarray(offset_idx, dtype=np.int64)
        dt = np.ascontiguousarray(dt, dtype=np.float64)
        n = out_idx.shape[0]
        if not (in_idx.shape[0] == offset_idx.shape[0] == dt.shape[0] == n):
            raise ValueError("edge arrays must have equal length")
        if n:
            if dt.min() < 0:
                raise ValueError("time differences must be non-negative")
            if crop_window is not None and dt.max() > crop_window:
                raise ValueError("edge exceeds the crop window")
            same = out_idx[1:] == out_idx[:-1]
            if np.any(out_idx[1:] < out_idx[:-1]):
                raise ValueError("edges must be grouped by ascending output event")
            if np.any(same & (in_idx[1:] <= in_idx[:-1])):
                raise ValueError("edges within a group must ascend by input event")
        for arr in (out_idx, in_idx, offset_idx, dt):
            arr.setflags(write=False)
        self.num_out = int(num_out)
        self.num_in = int(num_in)
        self.out_idx = out_idx
        self.in_idx = in_idx
        self.offset_idx = offset_idx
        self.dt = dt
        self.crop_window = crop_window
        self._row_splits = None
        self._by_offset = None

    @property
    def num_edges(self):
        return self.out_idx.shape[0]

    def by_offset(self, m_u):
        """Edge positions grouped by spatial offset, canonical order kept."""
        if self._by_offset is None or len(self._by_offset) != m_u:
            groups = [[] for _ in range(m_u)]
            order = np.argsort(self.offset_idx, kind="stable")
            bounds = np.searchsorted(self.offset_idx[order], np.arange(m_u + 1))
            self._by_offset = [order[bounds[u]:bounds[u + 1]] for u in range(m_u)]
        return self._by_offset

    def __repr__(self):
        return (f"EventEdgeSet(num_out={self.num_out}, num_in={self.num_in}, "
                f"num_edges={self.num_edges}, crop_window={self.crop_window})")


def build_event_edges(input_stream, output_stream, window, stride, t_tilde,
                      crop_window=4.0):
    """Connect output events to earlier input events in their spatial window.

    An edge (i, j, u) exists when input pixel x_j equals
    ``stride * x'_i + u - anchor`` with u inside the window, ``t_j <= t_i``,
    and (when cropping) the scaled time difference is at most ``crop_window``.
    Pass ``crop_window=None`` for the exact, uncropped edge set.
    """
    if output_stream.grid != output_grid(input_stream.grid, stride):
        raise ValueError(f"output grid {output_stream.grid} inconsistent with "
                         f"stride {stride} over input grid {input_stream.grid}")
    if not t_tilde > 0:
        raise ValueError("t_tilde must be positive")
    win_h, win_w = int(window[0]), int(window[1])
    anchor_y, anchor_x = win_h // 2, win_w // 2
    height, width = input_stream.grid

    by_pixel = {}
    pix = input_stream.ys * width + input_stream.xs
    order = np.argsort(pix, kind="stable")
    sorted_pix = pix[order]
    starts = np.flatnonzero(np.r_[True, sorted_pix[1:] != sorted_pix[:-1]])
    bounds = np.append(starts, order.shape[0])
    for k, s in enumerate(starts):
        ids = order[s:bounds[k + 1]]
        by_pixel[int(sorted_pix[s])] = (input_stream.times[ids], ids)

    out_chunks, in_chunks, u_chunks, dt_chunks = [], [], [], []
    for i in range(output_stream.num_events):
        t_i = output_stream.times[i]
        oy = int(output_stream.ys[i])
        ox = int(output_stream.xs[i])
        row_j, row_u, row_dt = [], [], []
        for dy in range(win_h):
            py = stride * oy + dy - anchor_y
            if py < 0 or py >= height:
                continue
            for dx in range(win_w):
                px = stride * ox + dx - anchor_x
                if px < 0 or px >= width:
                    continue
                entry = by_pixel.get(py * width + px)
                if entry is None:
                    continue
                times_p, ids_p = entry
                hi = np.searchsorted(times_p, t_i, side="right")
                if hi == 0:
                    continue
                js = ids_p[:hi]
                dts = (t_i - times_p[:hi]) / t_tilde
                if crop_window is not None:
                    keep = dts <= crop_window
                    js = js[keep]
                    dts = dts[keep]
                if js.size:
                    row_j.append(js)
                    row_u.append(np.full(js.size, dy * win_w + dx, dtype=np.int64))
                    row_dt.append(dts)
        if not row_j:
            continue
        js = np.concatenate(row_j)
        us = np.concatenate(row_u)
        dts = np.concatenate(row_dt)
        pos = np.argsort(js, kind="stable")
        out_chunks.append(np.full(js.size, i, dtype=np.int64))
        in_chunks.append(js[pos])
        u_chunks.append(us[pos])
        dt_chunks.append(dts[pos])

    if out_chunks:
        out_idx = np.concatenate(out_chunks)
        in_idx = np.concatenate(in_chunks)
        offset_idx = np.concatenate(u_chunks)
        dt = np.concatenate(dt_chunks)
    else:
        out_idx = in_idx = offset_idx = np.zeros(0, dtype=np.int64)
        dt = np.zeros(0)
    return EventEdgeSet(output_stream.num_events, input_stream.num_events,
                        out_idx, in_idx, offset_idx, dt, crop_window=crop_window)


def _check_event_shapes(edges, features, params):
    if features.ndim != 2 or features.shape[0] != edges.num_in:
        raise ValueError("features must have one row per input event")
    if features.shape[1] != params.num_in_channels:
        raise ValueError(f"features have {features.shape[1]} channels but params "
                         f"expect {params.num_in_channels}")
    if edges.num_edges and edges.offset_idx.max() >= params.m_u:
        raise ValueError("edge spatial offset outside the kernel window")


def event_conv_forward(edges, features, params):
    """Batch event convolution: sum over edges and decay indices of
    exp(-lam[u,v] * dt) * F_j Theta^(u,v), grouped per output event.

    Decay weights are evaluated fresh on every call; the decay rates are live
    parameters.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    _check_event_shapes(edges, features, params)
    kern = backend.active()
    out = np.zeros((edges.num_out, params.num_out_channels))
    for u, sel in enumerate(edges.by_offset(params.m_u)):
        if sel.size == 0:
            continue
        oi = np.ascontiguousarray(edges.out_idx[sel])
        ii = np.ascontiguousarray(edges.in_idx[sel])
        dts = edges.dt[sel]
        for v in range(params.m_v):
            weights = np.exp(-params.lam[u, v] * dts)
            mixed = np.zeros((edges.num_out, params.num_in_channels))
            kern.edge_accumulate(mixed, oi, ii, weights, features)
            out += mixed @ params.theta[u, v]
    return out


def event_conv_backward(edges, features, params, d_out):
    """Gradients of the batch event convolution.

    Returns (d_features, d_theta, d_lam); the decay-rate gradient contracts
    the per-edge derivative -dt * exp(-lam dt) against the edge contribution.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    _check_event_shapes(edges, features, params)
    d_out = np.ascontiguousarray(d_out, dtype=np.float64)
    if d_out.shape != (edges.num_out, params.num_out_channels):
        raise ValueError(f"d_out must be {(edges.num_out, params.num_out_channels)}, "
                         f"got {d_out.shape}")
    kern = backend.active()
    d_features = np.zeros_like(features)
    d_theta = np.zeros_like(params.theta)
    d_lam = np.zeros_like(params.lam)
    for u, sel in enumerate(edges.by_offset(params.m_u)):
        if sel.size == 0:
            continue
        oi = np.ascontiguousarray(edges.out_idx[sel])
        ii = np.ascontiguousarray(edges.in_idx[sel])
        dts = edges.dt[sel]
        f_rows = features[ii]
        g_rows = d_out[oi]
        for v in range(params.m_v):
            weights = np.exp(-params.lam[u, v] * dts)
            d_theta[u, v] = (f_rows * weights[:, None]).T @ g_rows
            mixed = f_rows @ params.theta[u, v]
            d_lam[u, v] = np.einsum("e,ep,ep->", -dts * weights, mixed, g_rows)
            spread = np.ascontiguousarray(d_out @ params.theta[u, v].T)
            kern.edge_accumulate(d_features, ii, oi, weights, spread)
    return d_features, d_theta, d_lam


def induced_neighborhood_tensor(edges, params):
    """The dense-basis view of an event edge set.

    Column u * M_v + v holds exp(-lam[u,v] * dt) on edges with spatial offset
    u and zero elsewhere, so the generic convolution over this tensor equals
    the native event path with M = M_u * M_v.
    """
    m_total = params.m_u * params.m_v
    values = np.zeros((edges.num_edges, m_total))
    for u, sel in enumerate(edges.by_offset(params.m_u)):
        if sel.size == 0:
            continue
        for v in range(params.m_v):
            values[sel, u * params.m_v + v] = np.exp(-params.lam[u, v] * edges.dt[sel])
    structure = Neighborhood(edges.num_out, edges.num_in, edges.out_idx,
                             edges.in_idx, edges.dt[:, None], radius=None)
    return NeighborhoodTensor(structure, values, weighted=False)


def flat_theta(params):
    """Kernel blocks reshaped to (M_u * M_v, Q, P) matching the induced tensor."""
    return params.theta.reshape(params.m_u * params.m_v,
                                params.num_in_channels,
                                params.num_out_channels)
