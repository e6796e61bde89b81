"""Monomial basis sets and their evaluation over neighborhood edges.

The M basis values of every edge form one row of a dense E x M table; column
m is the (flattened) sparse neighborhood matrix for basis function m. Powers
are computed by iterated multiplication so that negating an edge vector flips
the sign of a value exactly when the total degree is odd, bit for bit.
"""

import numpy as np


class BasisSet:
    """Ordered multi-indices of monomials in D variables.

    Canonical order: ascending total degree, then within a degree the leading
    variable's exponent descends first ((1,0) before (0,1)); the constant
    monomial always comes first.
    """

    __slots__ = ("dim", "exponents")

    def __init__(self, dim, exponents):
        exponents = np.ascontiguousarray(exponents, dtype=np.int64)
        if exponents.ndim != 2 or exponents.shape[1] != dim:
            raise ValueError("exponents must be M x D")
        if np.any(exponents < 0):
            raise ValueError("exponents must be non-negative")
        exponents.setflags(write=False)
        self.dim = int(dim)
        self.exponents = exponents

    @property
    def size(self):
        return self.exponents.shape[0]

    def __len__(self):
        return self.exponents.shape[0]

    def __repr__(self):
        return f"BasisSet(dim={self.dim}, size={self.size})"


def monomial_basis(dim, max_order):
    """All monomial multi-indices with total degree <= max_order."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")

    def extend(prefix, remaining):
        if len(prefix) == dim - 1:
            yield prefix + (remaining,)
            return
        for e in range(remaining, -1, -1):
            yield from extend(prefix + (e,), remaining - e)

    exps = []
    for degree in range(max_order + 1):
        exps.extend(extend((), degree))
    return BasisSet(dim, np.asarray(exps, dtype=np.int64))


def _eval_many(basis, offsets):
    """Evaluate every basis monomial at every offset vector: (E, M)."""
    exps = basis.exponents
    n_edges, dim = offsets.shape
    max_exp = int(exps.max()) if exps.size else 0
    pows = np.empty((n_edges, dim, max_exp + 1))
    pows[:, :, 0] = 1.0
    for e in range(1, max_exp + 1):
        np.multiply(pows[:, :, e - 1], offsets, out=pows[:, :, e])
    values = np.ones((n_edges, basis.size))
    for d in range(dim):
        values *= pows[:, d, exps[:, d]]
    return values


def eval_basis(basis, offset):
    """Basis values at a single offset vector; 0**0 is 1."""
    offset = np.asarray(offset, dtype=np.float64).reshape(1, basis.dim)
    return _eval_many(basis, offset)[0]


class NeighborhoodTensor:
    """Per-edge basis values over a neighborhood, optionally radius weighted.

    Weighted values are ``(w_e / W_i) * p_m(dx_e)`` with ``w = 1 - d/r``; the
    constant column of a weighted tensor therefore sums to one per non-empty
    output row.
    """

    __slots__ = ("structure", "values", "weighted")

    def __init__(self, structure, values, weighted):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != structure.num_edges:
            raise ValueError("values must be num_edges x M")
        values.setflags(write=False)
        self.structure = structure
        self.values = values
        self.weighted = bool(weighted)

    @property
    def num_basis(self):
        return self.values.shape[1]

    def __repr__(self):
        return (f"NeighborhoodTensor(num_out={self.structure.num_out}, "
                f"num_edges={self.structure.num_edges}, M={self.num_basis}, "
                f"weighted={self.weighted})")


def edge_weights(nb):
    """Radius weights ``1 - d/r`` per edge, clamped at the boundary.

    The clamp only absorbs the 1-ulp overshoot sqrt can produce for edges
    admitted at distance exactly r.
    """
    if nb.radius is None or not nb.radius > 0:
        raise ValueError("weighting requires a ball neighborhood with a positive radius")
    d = np.linalg.norm(nb.offsets, axis=1)
    return np.maximum(1.0 - d / nb.radius, 0.0)


def build_neighborhood_tensor(nb, basis, weighted=False):
    """Evaluate ``basis`` on every edge of ``nb``.

    With ``weighted`` the per-edge values are scaled by the normalized radius
    weight of the edge; output rows whose weights sum to zero (all neighbors
    exactly at the radius) are forced to zero rather than divided by zero.
    """
    if basis.dim != nb.dim:
        raise ValueError(f"basis is {basis.dim}-D but edges are {nb.dim}-D")
    values = _eval_many(basis, nb.offsets)
    if weighted:
        w = edge_weights(nb)
        totals = np.bincount(nb.out_idx, weights=w, minlength=nb.num_out)
        row_totals = totals[nb.out_idx]
        scale = np.divide(w, row_totals, out=np.zeros_like(w),
                          where=row_totals > 0)
        values *= scale[:, None]
    return NeighborhoodTensor(nb, values, weighted)
