"""Point clouds, a uniform-grid spatial index, and neighbor searches.

A neighborhood is a sparse set of directed edges from an output cloud to an
input cloud, each carrying the offset vector ``xi_i - x_j``. Edges are always
stored in canonical order (ascending output index, then ascending input
index), which makes every downstream sparse structure bit-comparable.
"""

import numpy as np

from . import backend


class PointCloud:
    """Immutable set of S points in R^D.

    A 1-D array is accepted as a convenience and treated as S points in R^1.
    """

    __slots__ = ("coords",)

    def __init__(self, coords):
        coords = np.array(coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2:
            raise ValueError(f"coords must be S x D, got shape {coords.shape}")
        if coords.size and not np.isfinite(coords).all():
            raise ValueError("coordinates must be finite")
        coords.setflags(write=False)
        self.coords = coords

    @property
    def size(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def __len__(self):
        return self.coords.shape[0]

    def __repr__(self):
        return f"PointCloud(size={self.size}, dim={self.dim})"


class Neighborhood:
    """Sparse out->in edge structure with per-edge offsets ``xi_i - x_j``.

    ``radius`` is set for ball neighborhoods and ``None`` for kNN ones.
    """

    __slots__ = ("num_out", "num_in", "out_idx", "in_idx", "offsets", "radius",
                 "_row_splits")

    def __init__(self, num_out, num_in, out_idx, in_idx, offsets, radius=None):
        out_idx = np.ascontiguousarray(out_idx, dtype=np.int64)
        in_idx = np.ascontiguousarray(in_idx, dtype=np.int64)
        offsets = np.ascontiguousarray(offsets, dtype=np.float64)
        if out_idx.shape != in_idx.shape or out_idx.ndim != 1:
            raise ValueError("out_idx and in_idx must be equal-length 1-D arrays")
        if offsets.ndim != 2 or offsets.shape[0] != out_idx.shape[0]:
            raise ValueError("offsets must be E x D")
        if out_idx.size:
            if out_idx.min() < 0 or out_idx.max() >= num_out:
                raise ValueError("out_idx out of range")
            if in_idx.min() < 0 or in_idx.max() >= num_in:
                raise ValueError("in_idx out of range")
            same_row = out_idx[1:] == out_idx[:-1]
            if np.any(out_idx[1:] < out_idx[:-1]):
                raise ValueError("edges must be grouped by ascending out index")
            if np.any(same_row & (in_idx[1:] <= in_idx[:-1])):
                raise ValueError("edges within a row must have strictly ascending in index")
        if radius is not None and radius < 0:
            raise ValueError("radius must be non-negative")
        for arr in (out_idx, in_idx, offsets):
            arr.setflags(write=False)
        self.num_out = int(num_out)
        self.num_in = int(num_in)
        self.out_idx = out_idx
        self.in_idx = in_idx
        self.offsets = offsets
        self.radius = radius
        self._row_splits = None

    @property
    def num_edges(self):
        return self.out_idx.shape[0]

    @property
    def dim(self):
        return self.offsets.shape[1]

    @property
    def row_splits(self):
        """Prefix offsets of each output row into the edge arrays (S'+1,)."""
        if self._row_splits is None:
            counts = np.bincount(self.out_idx, minlength=self.num_out)
            splits = np.zeros(self.num_out + 1, dtype=np.int64)
            np.cumsum(counts, out=splits[1:])
            splits.setflags(write=False)
            self._row_splits = splits
        return self._row_splits

    def __repr__(self):
        return (f"Neighborhood(num_out={self.num_out}, num_in={self.num_in}, "
                f"num_edges={self.num_edges}, radius={self.radius})")


class GridIndex:
    """Uniform-grid spatial index over a point cloud.

    Points land in the bucket ``floor(x / cell_size)`` componentwise. Buckets
    are stored packed (sorted flat keys + CSR offsets) so queries can binary
    search; the ``buckets`` property exposes the plain tuple-keyed map.
    """

    __slots__ = ("source", "cell_size", "_cells", "_keys", "_starts", "_ids",
                 "_mins", "_dims", "_strides")

    def __init__(self, source, cell_size):
        if not cell_size > 0:
            raise ValueError("cell_size must be positive")
        self.source = source
        self.cell_size = float(cell_size)
        coords = source.coords
        n, dim = coords.shape
        if n == 0:
            self._cells = np.zeros((0, dim), dtype=np.int64)
            self._keys = np.zeros(0, dtype=np.int64)
            self._starts = np.zeros(1, dtype=np.int64)
            self._ids = np.zeros(0, dtype=np.int64)
            self._mins = np.zeros(dim, dtype=np.int64)
            self._dims = np.ones(dim, dtype=np.int64)
            self._strides = np.ones(dim, dtype=np.int64)
            return
        cells = np.floor(coords / self.cell_size).astype(np.int64)
        mins = cells.min(axis=0)
        dims = cells.max(axis=0) - mins + 1
        if int(np.prod(dims.astype(object))) >= 2 ** 62:
            raise ValueError("grid too large for the packed index; increase cell_size")
        strides = np.ones(dim, dtype=np.int64)
        for d in range(dim - 2, -1, -1):
            strides[d] = strides[d + 1] * dims[d + 1]
        flat = (cells - mins) @ strides
        order = np.argsort(flat, kind="stable")
        sorted_flat = flat[order]
        starts_mask = np.r_[True, sorted_flat[1:] != sorted_flat[:-1]]
        key_starts = np.flatnonzero(starts_mask)
        self._cells = cells[order[key_starts]]
        self._keys = sorted_flat[key_starts]
        self._starts = np.append(key_starts, n).astype(np.int64)
        self._ids = order.astype(np.int64)
        self._mins = mins
        self._dims = dims
        self._strides = strides

    @property
    def buckets(self):
        """Map from integer cell tuples to the point indices they contain."""
        out = {}
        for k in range(self._keys.shape[0]):
            cell = tuple(int(c) for c in self._cells[k])
            out[cell] = self._ids[self._starts[k]:self._starts[k + 1]].copy()
        return out

    def __repr__(self):
        return (f"GridIndex(size={self.source.size}, cell_size={self.cell_size}, "
                f"occupied_cells={self._keys.shape[0]})")


def build_grid_index(cloud, cell_size):
    """Index ``cloud`` on a uniform grid with the given cell size."""
    return GridIndex(cloud, cell_size)


def _finish_neighborhood(query_coords, source_coords, out_idx, in_idx, num_out,
                         num_in, radius):
    offsets = query_coords[out_idx] - source_coords[in_idx]
    return Neighborhood(num_out, num_in, out_idx, in_idx, offsets, radius=radius)


def ball_search(index, queries, radius):
    """All source points within the closed ball of ``radius`` around each query.

    Correct for any radius: when ``radius`` exceeds the index cell size the
    query simply scans a wider block of cells, and radius 0 keeps exactly the
    coincident pairs (the ball is closed).
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    source = index.source
    if queries.dim != source.dim:
        raise ValueError(f"dimension mismatch: queries are {queries.dim}-D, "
                         f"source is {source.dim}-D")
    kern = backend.active()
    out_idx, in_idx = kern.grid_ball_query(
        source.coords, index._ids, index._keys, index._starts, index._mins,
        index._dims, index._strides, index.cell_size, queries.coords,
        float(radius))
    return _finish_neighborhood(queries.coords, source.coords, out_idx, in_idx,
                                queries.size, source.size, float(radius))


def brute_force_ball_search(source, queries, radius):
    """All-pairs ball search; the testing oracle for ``ball_search``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if queries.dim != source.dim:
        raise ValueError(f"dimension mismatch: queries are {queries.dim}-D, "
                         f"source is {source.dim}-D")
    if queries.size == 0 or source.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return _finish_neighborhood(queries.coords, source.coords, empty, empty,
                                    queries.size, source.size, float(radius))
    d2 = ((queries.coords[:, None, :] - source.coords[None, :, :]) ** 2).sum(axis=2)
    out_idx, in_idx = np.nonzero(d2 <= radius * radius)
    return _finish_neighborhood(queries.coords, source.coords,
                                out_idx.astype(np.int64), in_idx.astype(np.int64),
                                queries.size, source.size, float(radius))


def knn_search(source, queries, k):
    """The k nearest source points of each query; ties go to the lower index.

    Provided for comparison experiments; rows always hold exactly k edges and
    no radius is associated with the result.
    """
    if not 1 <= k <= source.size:
        raise ValueError(f"k must be in [1, {source.size}], got {k}")
    if queries.dim != source.dim:
        raise ValueError(f"dimension mismatch: queries are {queries.dim}-D, "
                         f"source is {source.dim}-D")
    n_q = queries.size
    sel = np.empty((n_q, k), dtype=np.int64)
    chunk = max(1, min(n_q, 8 * 1024 * 1024 // max(1, source.size * 8)))
    for start in range(0, n_q, chunk):
        q = queries.coords[start:start + chunk]
        d2 = ((q[:, None, :] - source.coords[None, :, :]) ** 2).sum(axis=2)
        if k < source.size:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
            cutoff = np.take_along_axis(d2, part, axis=1).max(axis=1)
        else:
            cutoff = d2.max(axis=1)
        for row in range(d2.shape[0]):
            # everything at or below the k-th distance, then the stable
            # (distance, index) order settles ties exactly
            cand = np.flatnonzero(d2[row] <= cutoff[row])
            order = cand[np.argsort(d2[row][cand], kind="stable")]
            sel[start + row] = order[:k]
    sel.sort(axis=1)
    out_idx = np.repeat(np.arange(n_q, dtype=np.int64), k)
    in_idx = sel.reshape(-1)
    return _finish_neighborhood(queries.coords, source.coords, out_idx, in_idx,
                                n_q, source.size, None)
