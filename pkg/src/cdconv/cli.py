"""Operator-facing command line.

Subcommands: ``sample`` (subsampling), ``conv`` (point-cloud convolution),
``event-sim`` (LIF subsampling plus one event-convolution layer), ``verify``
(seeded property suites) and ``bench`` (forward/backward timing on a fixed
random instance, comparing the compiled and pure-Python backends).

Exit codes: 0 success/verified, 1 verification failure, 2 usage or format
error. Output is line-oriented ``key: value`` plus aligned tables. All
randomness is NumPy PCG64 seeded via --seed, so runs are reproducible.
"""

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import backend, storage
from .conv import (KernelParams, Ordering, block_diagonalize, choose_ordering,
                   conv_backward, conv_forward, multiply_adds)
from .events import (build_event_edges, event_conv_forward, lif_subsample,
                     polarity_features)
from .geometry import PointCloud, ball_search, build_grid_index, knn_search
from .kernels import BasisSet, build_neighborhood_tensor, monomial_basis
from .sampling import (approx_ifp_no_rejection, approx_ifp_with_rejection,
                       ifp_sample, rejection_sample)
from .streaming import run_streaming
from .verify import SUITES


def _write_indices(path, indices):
    Path(path).write_text("".join(f"{i}\n" for i in indices), encoding="utf-8")


def _write_dmin(path, d_min):
    Path(path).write_text("".join("%.17g\n" % v for v in d_min), encoding="utf-8")


def cmd_sample(args):
    cloud = storage.read_point_cloud(args.input)
    needs_radius = args.method in ("approx-ifp", "rejection", "approx-ifp-rej")
    needs_count = args.method in ("ifp", "approx-ifp", "approx-ifp-rej")
    if needs_radius and args.radius is None:
        raise ValueError(f"--radius is required for method {args.method}")
    if needs_count and args.count is None:
        raise ValueError(f"--count is required for method {args.method}")
    if args.method == "ifp":
        result = ifp_sample(cloud, args.count)
    elif args.method == "approx-ifp":
        nb = ball_search(build_grid_index(cloud, args.radius), cloud, args.radius)
        result = approx_ifp_no_rejection(cloud, args.count, nb)
    elif args.method == "rejection":
        result = rejection_sample(cloud, args.radius)
    else:
        result = approx_ifp_with_rejection(cloud, args.count, args.radius)
    _write_indices(args.output, result.indices)
    _write_dmin(f"{args.output}.dmin.csv", result.d_min)
    print(f"selected: {result.indices.shape[0]}")
    return 0


def _load_kernel_params(path):
    if storage._is_tensor_file(path):
        theta = storage.read_tensor(path)
        if theta.ndim != 3:
            raise storage.FormatError(f"{path}: expected a rank-3 parameter "
                                      f"tensor, got rank {theta.ndim}")
        return KernelParams(theta)
    params = storage.read_params(path)
    if not isinstance(params, KernelParams):
        raise storage.FormatError(f"{path}: expected kernel parameters")
    return params


def cmd_conv(args):
    cloud_in = storage.read_point_cloud(args.cloud_in)
    cloud_out = storage.read_point_cloud(args.cloud_out)
    features = storage.read_matrix(args.features)
    params = _load_kernel_params(args.theta)
    nb = ball_search(build_grid_index(cloud_in, args.radius), cloud_out,
                     args.radius)
    basis = monomial_basis(cloud_in.dim, args.order)
    if basis.size != params.num_basis:
        raise ValueError(f"basis order {args.order} in {cloud_in.dim}-D gives "
                         f"{basis.size} functions but theta has "
                         f"{params.num_basis} blocks")
    nt = build_neighborhood_tensor(nb, basis, weighted=args.weighted)
    if args.ordering == "auto":
        ordering = choose_ordering(max(nb.num_in, 1), max(nb.num_out, 1),
                                   params.num_in_channels,
                                   params.num_out_channels,
                                   max(basis.size, 1), max(nb.num_edges, 1))
    else:
        ordering = (Ordering.LEFT_TO_RIGHT if args.ordering == "l2r"
                    else Ordering.RIGHT_TO_LEFT)
    out = conv_forward(nt, features, params, ordering)
    storage.write_matrix(args.output, out,
                         binary=not str(args.output).endswith(".csv"))
    print(f"ordering: {ordering.value}")
    print(f"edges: {nb.num_edges}")
    return 0


def cmd_event_sim(args):
    stream = storage.read_event_stream(args.events)
    cfg, params, crop = storage.read_event_sim_config(args.config)
    if params.num_in_channels != 2:
        raise ValueError("event simulation lifts polarity to 2 channels; "
                         "config must declare q=2")
    subsampled = lif_subsample(stream, cfg)
    featured = polarity_features(stream)
    if args.streaming:
        out = run_streaming(featured, subsampled, params)
    else:
        edges = build_event_edges(featured, subsampled, params.window,
                                  params.stride, params.t_tilde,
                                  crop_window=crop)
        out = event_conv_forward(edges, featured.features, params)
    lines = []
    for k in range(subsampled.num_events):
        feats = ",".join("%.17g" % v for v in out[k])
        lines.append("%.17g,%d,%d,%s" % (subsampled.times[k], subsampled.xs[k],
                                         subsampled.ys[k], feats))
    Path(args.output).write_text("".join(f"{line}\n" for line in lines),
                                 encoding="utf-8")
    print(f"path: {'streaming' if args.streaming else 'batch'}")
    print(f"output_events: {subsampled.num_events}")
    return 0


def cmd_verify(args):
    run, tolerance = SUITES[args.suite]
    perturb = float(os.environ.get("CDCONV_VERIFY_PERTURB", "0") or 0.0)
    errors = [e + perturb for e in run(args.seed, args.trials)]
    for k, err in enumerate(errors):
        print(f"trial {k}: {err:.6e}")
    worst = max(errors)
    print(f"max error: {worst:.6e}")
    print(f"tolerance: {tolerance:.6e}")
    ok = worst <= tolerance
    print(f"result: {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def bench_instance(seed, s_in, s_out, q, p, m, k, batch):
    """The benchmark workload: a batched random kNN convolution instance."""
    rng = np.random.default_rng(seed)
    base = monomial_basis(3, 2)
    if m > base.size:
        raise ValueError(f"m must be at most {base.size}")
    basis = BasisSet(3, base.exponents[:m])
    parts = []
    for _ in range(batch):
        cloud = PointCloud(rng.uniform(0.0, 1.0, (s_in, 3)))
        queries = (cloud if s_out == s_in
                   else PointCloud(rng.uniform(0.0, 1.0, (s_out, 3))))
        nb = knn_search(cloud, queries, k)
        parts.append(build_neighborhood_tensor(nb, basis))
    batched, layout = block_diagonalize(parts)
    features = rng.standard_normal((batched.structure.num_in, q))
    params = KernelParams(rng.standard_normal((m, q, p)))
    cotangent = rng.standard_normal((batched.structure.num_out, p))
    return batched, features, params, cotangent


def cmd_bench(args):
    for name, value in (("s", args.s), ("s-out", args.s_out), ("q", args.q),
                        ("p", args.p), ("m", args.m), ("k", args.k),
                        ("batch", args.batch)):
        if value < 1:
            raise ValueError(f"--{name} must be positive")
    if args.reps < 0:
        raise ValueError("--reps must be >= 0")
    print(f"shape: M={args.m} Q={args.q} P={args.p} S={args.s} "
          f"S_out={args.s_out} k={args.k} batch={args.batch}")
    nt, features, params, cotangent = bench_instance(
        args.seed, args.s, args.s_out, args.q, args.p, args.m, args.k,
        args.batch)
    nb = nt.structure
    print(f"edges: {nb.num_edges}")
    for ordering in (Ordering.LEFT_TO_RIGHT, Ordering.RIGHT_TO_LEFT):
        ops = multiply_adds(nb.num_in, nb.num_out, args.q, args.p, args.m,
                            nb.num_edges, ordering)
        print(f"multiply_adds[{ordering.value}]: {ops}")
    if args.reps == 0:
        return 0
    print(f"{'backend':<10} {'ordering':<15} {'forward_ms':>12} {'backward_ms':>12}")
    for name in backend.available_backends():
        with backend.use_backend(name):
            for ordering in (Ordering.LEFT_TO_RIGHT, Ordering.RIGHT_TO_LEFT):
                fwd_times = []
                bwd_times = []
                for _ in range(args.reps):
                    start = time.perf_counter()
                    conv_forward(nt, features, params, ordering)
                    fwd_times.append(1e3 * (time.perf_counter() - start))
                    start = time.perf_counter()
                    conv_backward(nt, features, params, cotangent)
                    bwd_times.append(1e3 * (time.perf_counter() - start))
                print(f"{name:<10} {ordering.value:<15} "
                      f"{statistics.median(fwd_times):>12.3f} "
                      f"{statistics.median(bwd_times):>12.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdconv",
        description="Sparse convolutions on continuous domains: sampling, "
                    "neighbor search, convolution, event simulation, "
                    "verification and benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="subsample a point cloud")
    p.add_argument("--input", required=True, help="point cloud (CSV or tensor)")
    p.add_argument("--method", required=True,
                   choices=["ifp", "approx-ifp", "rejection", "approx-ifp-rej"])
    p.add_argument("--radius", type=float, help="ball radius (non-ifp methods)")
    p.add_argument("--count", type=int, help="output size (non-rejection methods)")
    p.add_argument("--output", required=True, help="selected indices, one per line")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("conv", help="one ball-neighborhood convolution")
    p.add_argument("--cloud-in", required=True)
    p.add_argument("--cloud-out", required=True)
    p.add_argument("--features", required=True, help="S x Q matrix file")
    p.add_argument("--theta", required=True,
                   help="rank-3 tensor file or kernel params manifest")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--order", type=int, required=True,
                   help="max monomial order of the basis")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--ordering", choices=["auto", "l2r", "r2l"], default="auto")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_conv)

    p = sub.add_parser("event-sim",
                       help="LIF subsampling plus one event convolution")
    p.add_argument("--events", required=True, help="event stream CSV")
    p.add_argument("--config", required=True, help="event_sim manifest")
    p.add_argument("--output", required=True)
    p.add_argument("--streaming", action="store_true",
                   help="use the constant-memory streaming path")
    p.set_defaults(func=cmd_event_sim)

    p = sub.add_parser("verify", help="run a seeded property suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time forward/backward on a fixed shape")
    p.add_argument("--s", type=int, default=4096)
    p.add_argument("--s-out", type=int, default=4096, dest="s_out")
    p.add_argument("--q", type=int, default=64)
    p.add_argument("--p", type=int, default=64)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
