"""The sparse convolution engine.

A convolution is a sum over basis functions of sparse-dense matrix products:
for each m the neighborhood matrix (the m-th column of the tensor values,
laid out on the edge structure) multiplies the feature matrix and the result
multiplies the m-th parameter block. Both association orders are provided;
they trade multiply-adds depending on the channel counts and cloud sizes, and
``choose_ordering`` picks the cheaper one from the exact operation counts.

Reductions are deterministic: the m loop is outermost and per-output
accumulation runs over edges in canonical order, so repeated runs are
bit-identical.
"""

import enum

import numpy as np

from . import backend
from .geometry import Neighborhood
from .kernels import NeighborhoodTensor


class Ordering(enum.Enum):
    LEFT_TO_RIGHT = "left-to-right"
    RIGHT_TO_LEFT = "right-to-left"


class KernelParams:
    """M learned Q x P parameter blocks, one per basis function."""

    __slots__ = ("theta",)

    def __init__(self, theta):
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.ndim != 3:
            raise ValueError("theta must be M x Q x P")
        if theta.size and not np.isfinite(theta).all():
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        self.theta = theta

    @property
    def num_basis(self):
        return self.theta.shape[0]

    @property
    def num_in_channels(self):
        return self.theta.shape[1]

    @property
    def num_out_channels(self):
        return self.theta.shape[2]


class FeaturelessParams:
    """M x P parameter matrix for the no-input-features convolution."""

    __slots__ = ("phi",)

    def __init__(self, phi):
        phi = np.ascontiguousarray(phi, dtype=np.float64)
        if phi.ndim != 2:
            raise ValueError("phi must be M x P")
        if phi.size and not np.isfinite(phi).all():
            raise ValueError("phi must be finite")
        phi.setflags(write=False)
        self.phi = phi


class BatchLayout:
    """Sizes and prefix offsets of the examples packed into one batch."""

    __slots__ = ("in_sizes", "out_sizes", "in_offsets", "out_offsets")

    def __init__(self, in_sizes, out_sizes):
        self.in_sizes = np.asarray(in_sizes, dtype=np.int64)
        self.out_sizes = np.asarray(out_sizes, dtype=np.int64)
        self.in_offsets = np.concatenate([[0], np.cumsum(self.in_sizes)]).astype(np.int64)
        self.out_offsets = np.concatenate([[0], np.cumsum(self.out_sizes)]).astype(np.int64)

    @property
    def num_parts(self):
        return self.in_sizes.shape[0]


def multiply_adds(s_in, s_out, q, p, m, e, ordering):
    """Exact fused multiply-add count of one forward evaluation."""
    if ordering is Ordering.LEFT_TO_RIGHT:
        return m * q * (e + s_out * p)
    return m * p * (e + s_in * q)


def choose_ordering(s_in, s_out, q, p, m, e):
    """The cheaper association order; left-to-right wins ties."""
    for v in (s_in, s_out, q, p, m, e):
        if v <= 0:
            raise ValueError("all size arguments must be positive")
    left = multiply_adds(s_in, s_out, q, p, m, e, Ordering.LEFT_TO_RIGHT)
    right = multiply_adds(s_in, s_out, q, p, m, e, Ordering.RIGHT_TO_LEFT)
    return Ordering.LEFT_TO_RIGHT if left <= right else Ordering.RIGHT_TO_LEFT


def _check_forward_shapes(nt, features, params):
    nb = nt.structure
    if features.ndim != 2:
        raise ValueError("features must be S x Q")
    if features.shape[0] != nb.num_in:
        raise ValueError(f"features have {features.shape[0]} rows but the "
                         f"neighborhood has {nb.num_in} input points")
    if params.num_basis != nt.num_basis:
        raise ValueError(f"params hold {params.num_basis} blocks but the tensor "
                         f"has {nt.num_basis} basis columns")
    if features.shape[1] != params.num_in_channels:
        raise ValueError(f"features have {features.shape[1]} channels but params "
                         f"expect {params.num_in_channels}")


def conv_forward(nt, features, params, ordering=None):
    """Sum over m of N^(m) F Theta^(m); outputs with no edges are zero rows.

    ``ordering=None`` selects the cheaper association order automatically.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    _check_forward_shapes(nt, features, params)
    nb = nt.structure
    m_count = nt.num_basis
    q = params.num_in_channels
    p = params.num_out_channels
    if ordering is None:
        ordering = choose_ordering(max(nb.num_in, 1), max(nb.num_out, 1), q, p,
                                   max(m_count, 1), max(nb.num_edges, 1))
    kern = backend.active()
    out = np.zeros((nb.num_out, p))
    for m in range(m_count):
        vals = np.ascontiguousarray(nt.values[:, m])
        if ordering is Ordering.LEFT_TO_RIGHT:
            gathered = np.zeros((nb.num_out, q))
            kern.edge_accumulate(gathered, nb.out_idx, nb.in_idx, vals, features)
            out += gathered @ params.theta[m]
        else:
            mixed = np.ascontiguousarray(features @ params.theta[m])
            kern.edge_accumulate(out, nb.out_idx, nb.in_idx, vals, mixed)
    return out


def conv_backward(nt, features, params, d_out):
    """Gradients of the forward map for a cotangent ``d_out``.

    Returns (d_features, d_params): dF = sum_m N^(m)^T dF' Theta^(m)^T and
    dTheta^(m) = (N^(m) F)^T dF'.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    _check_forward_shapes(nt, features, params)
    d_out = np.ascontiguousarray(d_out, dtype=np.float64)
    nb = nt.structure
    if d_out.shape != (nb.num_out, params.num_out_channels):
        raise ValueError(f"d_out must be {(nb.num_out, params.num_out_channels)}, "
                         f"got {d_out.shape}")
    kern = backend.active()
    q = params.num_in_channels
    d_features = np.zeros_like(features)
    d_theta = np.empty_like(params.theta)
    for m in range(nt.num_basis):
        vals = np.ascontiguousarray(nt.values[:, m])
        gathered = np.zeros((nb.num_out, q))
        kern.edge_accumulate(gathered, nb.out_idx, nb.in_idx, vals, features)
        d_theta[m] = gathered.T @ d_out
        spread = np.ascontiguousarray(d_out @ params.theta[m].T)
        kern.edge_accumulate(d_features, nb.in_idx, nb.out_idx, vals, spread)
    return d_features, KernelParams(d_theta)


def featureless_forward(nt, params):
    """First-layer convolution with no input features: row-sum the basis
    values per output point and multiply by the M x P parameter matrix."""
    if params.phi.shape[0] != nt.num_basis:
        raise ValueError(f"phi has {params.phi.shape[0]} rows but the tensor "
                         f"has {nt.num_basis} basis columns")
    nb = nt.structure
    kern = backend.active()
    sums = np.zeros((nb.num_out, nt.num_basis))
    kern.edge_accumulate(sums, nb.out_idx,
                         np.arange(nb.num_edges, dtype=np.int64),
                         np.ones(nb.num_edges), nt.values)
    return sums @ params.phi


def conv_forward_counted(nt, features, params, ordering):
    """Scalar-loop forward that counts every fused multiply-add it performs.

    Orders of magnitude slower than conv_forward; exists to validate
    choose_ordering against measured counts on small instances.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    _check_forward_shapes(nt, features, params)
    nb = nt.structure
    q = params.num_in_channels
    p = params.num_out_channels
    out = np.zeros((nb.num_out, p))
    count = 0
    for m in range(nt.num_basis):
        theta = params.theta[m]
        vals = nt.values[:, m]
        if ordering is Ordering.LEFT_TO_RIGHT:
            gathered = np.zeros((nb.num_out, q))
            for e in range(nb.num_edges):
                i, j, v = nb.out_idx[e], nb.in_idx[e], vals[e]
                for c in range(q):
                    gathered[i, c] += v * features[j, c]
                    count += 1
            for i in range(nb.num_out):
                for c in range(q):
                    for o in range(p):
                        out[i, o] += gathered[i, c] * theta[c, o]
                        count += 1
        else:
            mixed = np.zeros((nb.num_in, p))
            for j in range(nb.num_in):
                for c in range(q):
                    for o in range(p):
                        mixed[j, o] += features[j, c] * theta[c, o]
                        count += 1
            for e in range(nb.num_edges):
                i, j, v = nb.out_idx[e], nb.in_idx[e], vals[e]
                for o in range(p):
                    out[i, o] += v * mixed[j, o]
                    count += 1
    return out, count


def block_diagonalize(tensors):
    """Pack per-example neighborhood tensors into one block-diagonal tensor.

    Edge (i, j) of part b becomes (i + out_offset[b], j + in_offset[b]);
    convolving the packed tensor equals convolving the parts and stacking the
    outputs. All parts must share the edge dimension, basis width and
    weighted flag.
    """
    tensors = list(tensors)
    if not tensors:
        raise ValueError("need at least one part")
    first = tensors[0]
    for t in tensors[1:]:
        if t.weighted != first.weighted:
            raise ValueError("cannot mix weighted and unweighted parts")
        if t.num_basis != first.num_basis:
            raise ValueError("parts must share the basis width")
        if t.structure.dim != first.structure.dim:
            raise ValueError("parts must share the edge dimension")
    layout = BatchLayout([t.structure.num_in for t in tensors],
                         [t.structure.num_out for t in tensors])
    out_idx = np.concatenate([t.structure.out_idx + layout.out_offsets[b]
                              for b, t in enumerate(tensors)])
    in_idx = np.concatenate([t.structure.in_idx + layout.in_offsets[b]
                             for b, t in enumerate(tensors)])
    offsets = np.concatenate([t.structure.offsets for t in tensors])
    values = np.concatenate([t.values for t in tensors])
    radii = {t.structure.radius for t in tensors}
    radius = radii.pop() if len(radii) == 1 else None
    merged = Neighborhood(int(layout.out_offsets[-1]), int(layout.in_offsets[-1]),
                          out_idx, in_idx, offsets, radius=radius)
    return NeighborhoodTensor(merged, values, first.weighted), layout
