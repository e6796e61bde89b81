"""Seeded property suites behind the ``verify`` CLI command.

Each suite runs a number of randomized trials against an independent
reference (a direct per-edge sum, finite differences, or brute-force distance
checks) and reports one error magnitude per trial. Randomness is NumPy PCG64
seeded through SeedSequence spawning, so a seed pins every trial exactly.
"""

import math

import numpy as np

from .conv import KernelParams, Ordering, conv_backward, conv_forward
from .events import (EventKernelParams, EventStream, build_event_edges,
                     event_conv_backward, event_conv_forward, output_grid)
from .geometry import (PointCloud, ball_search, brute_force_ball_search,
                       build_grid_index)
from .kernels import build_neighborhood_tensor, monomial_basis
from .reference import (direct_conv, direct_event_conv, max_rel_err,
                        numerical_gradient)
from .sampling import (approx_ifp_no_rejection, approx_ifp_with_rejection,
                       ifp_sample, rejection_sample)
from .streaming import dual_equivalence_check

DUAL_TOLERANCE = 1e-9
GRADCHECK_TOLERANCE = 1e-5
ORACLE_TOLERANCE = 1e-12
SAMPLING_TOLERANCE = 0.0


def _trial_rngs(seed, trials):
    return [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(trials)]


def random_conv_instance(rng, max_points=32, max_queries=16, max_channels=4,
                         max_order=2):
    dim = int(rng.integers(2, 4))
    s_in = int(rng.integers(8, max_points + 1))
    s_out = int(rng.integers(4, max_queries + 1))
    radius = float(rng.uniform(0.25, 0.45))
    source = PointCloud(rng.uniform(0.0, 1.0, (s_in, dim)))
    queries = PointCloud(rng.uniform(0.0, 1.0, (s_out, dim)))
    nb = ball_search(build_grid_index(source, radius), queries, radius)
    basis = monomial_basis(dim, int(rng.integers(0, max_order + 1)))
    weighted = bool(rng.integers(0, 2))
    nt = build_neighborhood_tensor(nb, basis, weighted=weighted)
    q = int(rng.integers(1, max_channels + 1))
    p = int(rng.integers(1, max_channels + 1))
    features = rng.standard_normal((s_in, q))
    params = KernelParams(rng.standard_normal((basis.size, q, p)))
    return nt, features, params


def random_event_streams(rng, grid=(32, 32), num_in=1000, num_out=200,
                         stride=1, q=4):
    times = np.sort(rng.uniform(0.0, 1.0e4, num_in))
    xs = rng.integers(0, grid[1], num_in)
    ys = rng.integers(0, grid[0], num_in)
    features = rng.standard_normal((num_in, q))
    input_stream = EventStream(grid, times, xs, ys, features=features)
    grid_out = output_grid(grid, stride)
    out_times = np.sort(rng.uniform(0.0, 1.0e4, num_out))
    out_xs = rng.integers(0, grid_out[1], num_out)
    out_ys = rng.integers(0, grid_out[0], num_out)
    output_stream = EventStream(grid_out, out_times, out_xs, out_ys)
    return input_stream, output_stream


def random_event_params(rng, window=(3, 3), stride=1, m_v=2, q=4, p=8,
                        t_tilde=None):
    m_u = window[0] * window[1]
    if t_tilde is None:
        t_tilde = float(rng.uniform(500.0, 2000.0))
    lam = rng.uniform(0.5, 2.0, (m_u, m_v))
    theta = rng.standard_normal((m_u, m_v, q, p))
    return EventKernelParams(window, stride, t_tilde, lam, theta)


def analytic_dual_case():
    """Single-pixel fixture whose output feature is exactly 3/4 on both paths.

    Unit-feature inputs at t = 0 and 1, decay rate ln 2 per unit time, unit
    parameter: the queried output at t = 2 sums 1/4 + 1/2.
    """
    input_stream = EventStream((1, 1), [0.0, 1.0], [0, 0], [0, 0],
                               features=[[1.0], [1.0]])
    output_stream = EventStream((1, 1), [2.0], [0], [0])
    params = EventKernelParams((1, 1), 1, 1.0, [[math.log(2.0)]],
                               [[[[1.0]]]])
    return input_stream, output_stream, params


def run_dual(seed, trials):
    """Streaming vs batch equivalence on the analytic case plus fuzz."""
    errors = []
    in_s, out_s, params = analytic_dual_case()
    errors.append(dual_equivalence_check(in_s, out_s, params))
    for k, rng in enumerate(_trial_rngs(seed, trials)):
        stride = 1 if k % 2 == 0 else 2
        params = random_event_params(rng, stride=stride)
        in_s, out_s = random_event_streams(rng, stride=stride)
        errors.append(dual_equivalence_check(in_s, out_s, params))
    return errors


def _conv_gradcheck(rng):
    nt, features, params = random_conv_instance(rng, max_points=12,
                                                max_queries=6, max_channels=3,
                                                max_order=1)
    cotangent = rng.standard_normal((nt.structure.num_out,
                                     params.num_out_channels))
    d_features, d_params = conv_backward(nt, features, params, cotangent)

    def loss_features(f):
        return float(np.sum(cotangent * conv_forward(nt, f, params,
                                                     Ordering.LEFT_TO_RIGHT)))

    def loss_theta(th):
        return float(np.sum(cotangent * conv_forward(nt, features,
                                                     KernelParams(th),
                                                     Ordering.LEFT_TO_RIGHT)))

    err_f = max_rel_err(d_features, numerical_gradient(loss_features, features))
    err_t = max_rel_err(d_params.theta, numerical_gradient(loss_theta,
                                                           params.theta))
    return max(err_f, err_t)


def _event_gradcheck(rng):
    grid = (4, 4)
    params = random_event_params(rng, stride=1, m_v=2, q=2, p=2, t_tilde=1.0)
    in_s, out_s = random_event_streams(rng, grid=grid, num_in=8, num_out=5,
                                       stride=1, q=2)
    in_s = EventStream(grid, in_s.times / 1.0e3, in_s.xs, in_s.ys,
                       features=in_s.features)
    out_s = EventStream(grid, out_s.times / 1.0e3, out_s.xs, out_s.ys)
    edges = build_event_edges(in_s, out_s, params.window, params.stride,
                              params.t_tilde, crop_window=None)
    features = in_s.features
    cotangent = rng.standard_normal((edges.num_out, params.num_out_channels))
    d_features, d_theta, d_lam = event_conv_backward(edges, features, params,
                                                     cotangent)

    def loss_features(f):
        return float(np.sum(cotangent * event_conv_forward(edges, f, params)))

    def loss_theta(th):
        p2 = EventKernelParams(params.window, params.stride, params.t_tilde,
                               params.lam, th)
        return float(np.sum(cotangent * event_conv_forward(edges, features, p2)))

    def loss_lam(lam):
        p2 = EventKernelParams(params.window, params.stride, params.t_tilde,
                               lam, params.theta)
        return float(np.sum(cotangent * event_conv_forward(edges, features, p2)))

    err = max_rel_err(d_features, numerical_gradient(loss_features, features))
    err = max(err, max_rel_err(d_theta, numerical_gradient(loss_theta,
                                                           params.theta)))
    err = max(err, max_rel_err(d_lam, numerical_gradient(loss_lam, params.lam)))
    return err


def run_gradcheck(seed, trials):
    """Analytic gradients vs central finite differences, both engines."""
    errors = []
    for k, rng in enumerate(_trial_rngs(seed, trials)):
        errors.append(_conv_gradcheck(rng) if k % 2 == 0
                      else _event_gradcheck(rng))
    return errors


def run_oracle(seed, trials):
    """Forward convolutions and ball searches vs their brute-force oracles."""
    errors = []
    for rng in _trial_rngs(seed, trials):
        nt, features, params = random_conv_instance(rng)
        reference = direct_conv(nt, features, params)
        err = max_rel_err(conv_forward(nt, features, params,
                                       Ordering.LEFT_TO_RIGHT), reference)
        err = max(err, max_rel_err(conv_forward(nt, features, params,
                                                Ordering.RIGHT_TO_LEFT),
                                   reference))
        nb = nt.structure
        dim = nb.dim
        cloud = PointCloud(rng.uniform(0.0, 1.0, (int(rng.integers(10, 60)), dim)))
        queries = PointCloud(rng.uniform(0.0, 1.0, (int(rng.integers(5, 30)), dim)))
        radius = float(rng.uniform(0.15, 0.5))
        fast = ball_search(build_grid_index(cloud, radius), queries, radius)
        brute = brute_force_ball_search(cloud, queries, radius)
        if not (np.array_equal(fast.out_idx, brute.out_idx)
                and np.array_equal(fast.in_idx, brute.in_idx)):
            err = math.inf
        errors.append(err)
    return errors


def _sampling_trial(rng):
    dim = int(rng.integers(2, 4))
    n = int(rng.integers(30, 80))
    radius = float(rng.uniform(0.15, 0.35))
    cloud = PointCloud(rng.uniform(0.0, 1.0, (n, dim)))
    result = rejection_sample(cloud, radius)
    coords = cloud.coords
    sel = coords[result.indices]
    violation = 0.0
    r2 = radius * radius
    if sel.shape[0] > 1:
        pair_d2 = ((sel[:, None, :] - sel[None, :, :]) ** 2).sum(axis=2)
        pair_d2 += np.diag(np.full(sel.shape[0], np.inf))
        violation = max(violation, float(r2 - pair_d2.min()))
    cover_d2 = ((coords[:, None, :] - sel[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    violation = max(violation, float(cover_d2.max() - r2))
    violation = max(violation, 0.0)

    count = min(n, result.indices.shape[0] + int(rng.integers(1, 6)))
    combined = approx_ifp_with_rejection(cloud, count, radius)
    prefix = min(count, result.indices.shape[0])
    if not np.array_equal(combined.indices[:prefix], result.indices[:prefix]):
        return math.inf

    full_nb = ball_search(build_grid_index(cloud, 4.0), cloud, 4.0)
    k = int(rng.integers(1, n + 1))
    exact = ifp_sample(cloud, k)
    approx = approx_ifp_no_rejection(cloud, k, full_nb)
    if not np.array_equal(exact.indices, approx.indices):
        return math.inf
    return violation


def run_sampling(seed, trials):
    """Separation, coverage, prefix and degenerate-equivalence guarantees."""
    return [_sampling_trial(rng) for rng in _trial_rngs(seed, trials)]


SUITES = {
    "dual": (run_dual, DUAL_TOLERANCE),
    "gradcheck": (run_gradcheck, GRADCHECK_TOLERANCE),
    "sampling": (run_sampling, SAMPLING_TOLERANCE),
    "oracle": (run_oracle, ORACLE_TOLERANCE),
}
