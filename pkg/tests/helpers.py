"""Shared instance builders for the test suite."""

import numpy as np

from cdconv import (EventKernelParams, EventStream, KernelParams, PointCloud,
                    ball_search, build_grid_index, build_neighborhood_tensor,
                    monomial_basis, output_grid)


def lattice_cloud(rng, n, dim, denom=1024):
    """Random cloud on a 1/denom lattice so distances like 0.25 are exact."""
    return PointCloud(rng.integers(0, denom, (n, dim)) / denom)


def ball_instance(rng, s_in=24, s_out=10, dim=3, radius=0.35, order=1,
                  q=3, p=2, weighted=False):
    source = PointCloud(rng.uniform(0.0, 1.0, (s_in, dim)))
    queries = PointCloud(rng.uniform(0.0, 1.0, (s_out, dim)))
    nb = ball_search(build_grid_index(source, radius), queries, radius)
    basis = monomial_basis(dim, order)
    nt = build_neighborhood_tensor(nb, basis, weighted=weighted)
    features = rng.standard_normal((s_in, q))
    params = KernelParams(rng.standard_normal((basis.size, q, p)))
    return nt, features, params


def event_instance(rng, grid=(8, 8), num_in=60, num_out=25, stride=1,
                   window=(3, 3), m_v=2, q=3, p=2, t_tilde=100.0,
                   t_span=500.0, lam_lo=0.5, lam_hi=2.0):
    times = np.sort(rng.uniform(0.0, t_span, num_in))
    input_stream = EventStream(grid, times,
                               rng.integers(0, grid[1], num_in),
                               rng.integers(0, grid[0], num_in),
                               features=rng.standard_normal((num_in, q)))
    grid_out = output_grid(grid, stride)
    output_stream = EventStream(grid_out, np.sort(rng.uniform(0.0, t_span, num_out)),
                                rng.integers(0, grid_out[1], num_out),
                                rng.integers(0, grid_out[0], num_out))
    m_u = window[0] * window[1]
    params = EventKernelParams(window, stride, t_tilde,
                               rng.uniform(lam_lo, lam_hi, (m_u, m_v)),
                               rng.standard_normal((m_u, m_v, q, p)))
    return input_stream, output_stream, params
