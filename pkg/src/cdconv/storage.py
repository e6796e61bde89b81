"""Bit-exact file formats.

Binary tensors use a little-endian container (magic ``CDCT``, u32 rank, u32
dims, float64 row-major payload, rank <= 4). Point clouds and event streams
also have human-auditable CSV forms; parameters pair a tensor payload with a
line-oriented ``key=value`` manifest. Readers validate at the boundary and
never hand back objects that violate the domain invariants.
"""

import struct
from pathlib import Path

import numpy as np

from .conv import FeaturelessParams, KernelParams
from .events import EventKernelParams, EventStream, LIFConfig
from .geometry import PointCloud

MAGIC = b"CDCT"


class ParseError(ValueError):
    """Malformed file contents; messages carry the offending line number."""


class FormatError(ValueError):
    """Structurally valid file with inconsistent contents."""


def write_tensor(path, array):
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim > 4:
        raise FormatError(f"tensor rank {arr.ndim} exceeds 4")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_tensor(path):
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise ParseError(f"{path}: not a tensor file (bad magic)")
    (rank,) = struct.unpack_from("<I", data, 4)
    if rank > 4:
        raise FormatError(f"{path}: tensor rank {rank} exceeds 4")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    payload = data[8 + 4 * rank:]
    expected = 8 * int(np.prod(dims, dtype=np.int64)) if rank else 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, "
                          f"dims require {expected}")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def _is_tensor_file(path):
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def _parse_matrix_csv(path):
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split(",")
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(f"{path}: line {lineno}: expected {width} fields, "
                                 f"got {len(values)}")
            rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.asarray(rows, dtype=np.float64)


def read_matrix(path):
    """A rank-2 tensor file or a CSV table of decimal floats."""
    if _is_tensor_file(path):
        arr = read_tensor(path)
        if arr.ndim != 2:
            raise FormatError(f"{path}: expected a rank-2 tensor, got rank {arr.ndim}")
        return arr
    return _parse_matrix_csv(path)


def write_matrix(path, array, binary=False):
    array = np.asarray(array, dtype=np.float64)
    if binary:
        write_tensor(path, array)
        return
    lines = [",".join("%.17g" % v for v in row) for row in array]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")


def read_point_cloud(path):
    return PointCloud(read_matrix(path))


def write_point_cloud(path, cloud, binary=False):
    write_matrix(path, cloud.coords, binary=binary)


def read_event_stream(path):
    """CSV event stream: a ``%H,W`` header line then ``t,x,y,p`` rows."""
    grid = None
    times, xs, ys, ps = [], [], [], []
    last_t = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if text.startswith("%"):
                if grid is not None:
                    raise ParseError(f"{path}: line {lineno}: duplicate header")
                fields = text[1:].split(",")
                if len(fields) != 2:
                    raise ParseError(f"{path}: line {lineno}: header must be %H,W")
                try:
                    grid = (int(fields[0]), int(fields[1]))
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}: non-integer grid") from None
                continue
            if grid is None:
                raise ParseError(f"{path}: line {lineno}: missing %H,W header")
            fields = text.split(",")
            if len(fields) != 4:
                raise ParseError(f"{path}: line {lineno}: expected t,x,y,p")
            try:
                t, x, y, p = (int(f) for f in fields)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-integer field") from None
            if t < 0:
                raise ParseError(f"{path}: line {lineno}: negative timestamp")
            if last_t is not None and t < last_t:
                raise ParseError(f"{path}: line {lineno}: timestamp decreases")
            if not (0 <= x < grid[1] and 0 <= y < grid[0]):
                raise ParseError(f"{path}: line {lineno}: pixel ({x}, {y}) outside "
                                 f"grid {grid}")
            if p not in (0, 1):
                raise ParseError(f"{path}: line {lineno}: polarity must be 0 or 1")
            times.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
            last_t = t
    if grid is None:
        raise ParseError(f"{path}: missing %H,W header")
    return EventStream(grid, np.asarray(times, dtype=np.float64),
                       np.asarray(xs, dtype=np.int64),
                       np.asarray(ys, dtype=np.int64),
                       polarity=np.asarray(ps, dtype=np.int64))


def write_event_stream(path, stream):
    if stream.polarity is None:
        raise FormatError("event files carry polarity; stream has none")
    if stream.num_events and np.any(stream.times != np.floor(stream.times)):
        raise FormatError("event files carry integer microsecond timestamps")
    lines = [f"%{stream.grid[0]},{stream.grid[1]}"]
    for k in range(stream.num_events):
        lines.append(f"{int(stream.times[k])},{stream.xs[k]},{stream.ys[k]},"
                     f"{stream.polarity[k]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    """Line-oriented ``key=value`` file; '#' lines are comments."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ParseError(f"{path}: line {lineno}: expected key=value")
            key, _, value = text.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def _manifest_get(man, path, key):
    if key not in man:
        raise FormatError(f"{path}: missing key '{key}'")
    return man[key]


def _manifest_int(man, path, key):
    try:
        return int(_manifest_get(man, path, key))
    except ValueError:
        raise FormatError(f"{path}: key '{key}' must be an integer") from None


def _manifest_float(man, path, key):
    try:
        return float(_manifest_get(man, path, key))
    except ValueError:
        raise FormatError(f"{path}: key '{key}' must be a number") from None


def _manifest_pair(man, path, key):
    fields = _manifest_get(man, path, key).split(",")
    if len(fields) != 2:
        raise FormatError(f"{path}: key '{key}' must be two comma-separated integers")
    return int(fields[0]), int(fields[1])


def _data_path(man, path):
    return Path(path).parent / _manifest_get(man, path, "data")


def write_params(path, params):
    """Parameter bundle: a manifest at ``path`` plus a ``<path>.bin`` payload."""
    path = Path(path)
    data_name = path.name + ".bin"
    if isinstance(params, KernelParams):
        write_tensor(path.parent / data_name, params.theta)
        lines = ["kind=kernel",
                 f"m={params.num_basis}",
                 f"q={params.num_in_channels}",
                 f"p={params.num_out_channels}",
                 f"data={data_name}"]
    elif isinstance(params, FeaturelessParams):
        write_tensor(path.parent / data_name, params.phi)
        lines = ["kind=featureless",
                 f"m={params.phi.shape[0]}",
                 f"p={params.phi.shape[1]}",
                 f"data={data_name}"]
    elif isinstance(params, EventKernelParams):
        write_tensor(path.parent / data_name, params.theta)
        lam_text = ",".join("%.17g" % v for v in params.lam.reshape(-1))
        lines = ["kind=event_kernel",
                 f"window={params.window[0]},{params.window[1]}",
                 f"stride={params.stride}",
                 "t_tilde=%.17g" % params.t_tilde,
                 f"m_v={params.m_v}",
                 f"q={params.num_in_channels}",
                 f"p={params.num_out_channels}",
                 f"lambda={lam_text}",
                 f"data={data_name}"]
    else:
        raise TypeError(f"unsupported parameter object {type(params).__name__}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_lambda(man, path, m_u, m_v):
    text = _manifest_get(man, path, "lambda")
    try:
        lam = np.asarray([float(f) for f in text.split(",")], dtype=np.float64)
    except ValueError:
        raise FormatError(f"{path}: malformed lambda table") from None
    if lam.shape[0] != m_u * m_v:
        raise FormatError(f"{path}: lambda table has {lam.shape[0]} entries, "
                          f"window and m_v imply {m_u * m_v}")
    if np.any(lam <= 0):
        raise FormatError(f"{path}: decay rates must be positive")
    return lam.reshape(m_u, m_v)


def read_params(path):
    man = read_manifest(path)
    kind = _manifest_get(man, path, "kind")
    if kind == "kernel":
        theta = read_tensor(_data_path(man, path))
        shape = (_manifest_int(man, path, "m"), _manifest_int(man, path, "q"),
                 _manifest_int(man, path, "p"))
        if theta.shape != shape:
            raise FormatError(f"{path}: manifest declares {shape}, payload is "
                              f"{theta.shape}")
        return KernelParams(theta)
    if kind == "featureless":
        phi = read_tensor(_data_path(man, path))
        shape = (_manifest_int(man, path, "m"), _manifest_int(man, path, "p"))
        if phi.shape != shape:
            raise FormatError(f"{path}: manifest declares {shape}, payload is "
                              f"{phi.shape}")
        return FeaturelessParams(phi)
    if kind == "event_kernel":
        window = _manifest_pair(man, path, "window")
        m_u = window[0] * window[1]
        m_v = _manifest_int(man, path, "m_v")
        theta = read_tensor(_data_path(man, path))
        shape = (m_u, m_v, _manifest_int(man, path, "q"),
                 _manifest_int(man, path, "p"))
        if theta.shape != shape:
            raise FormatError(f"{path}: manifest declares {shape}, payload is "
                              f"{theta.shape}")
        lam = _read_lambda(man, path, m_u, m_v)
        return EventKernelParams(window, _manifest_int(man, path, "stride"),
                                 _manifest_float(man, path, "t_tilde"), lam, theta)
    raise FormatError(f"{path}: unknown params kind '{kind}'")


def read_event_sim_config(path):
    """Combined LIF + convolution-layer manifest for the event simulator.

    Returns (LIFConfig, EventKernelParams, crop_window); the LIF shares the
    convolution's window and stride, ``lif_t_tilde`` defaults to the
    convolution decay time, and an absent ``crop_window`` means uncropped.
    """
    man = read_manifest(path)
    if _manifest_get(man, path, "kind") != "event_sim":
        raise FormatError(f"{path}: expected kind=event_sim")
    window = _manifest_pair(man, path, "window")
    stride = _manifest_int(man, path, "stride")
    t_tilde = _manifest_float(man, path, "t_tilde")
    m_u = window[0] * window[1]
    m_v = _manifest_int(man, path, "m_v")
    theta = read_tensor(_data_path(man, path))
    shape = (m_u, m_v, _manifest_int(man, path, "q"), _manifest_int(man, path, "p"))
    if theta.shape != shape:
        raise FormatError(f"{path}: manifest declares {shape}, payload is "
                          f"{theta.shape}")
    lam = _read_lambda(man, path, m_u, m_v)
    params = EventKernelParams(window, stride, t_tilde, lam, theta)
    lif_t = float(man.get("lif_t_tilde", t_tilde))
    cfg = LIFConfig(window=window, stride=stride, t_tilde=lif_t,
                    v_thresh=_manifest_float(man, path, "v_thresh"),
                    v_reset=_manifest_float(man, path, "v_reset"))
    crop = float(man["crop_window"]) if "crop_window" in man else None
    return cfg, params, crop


def write_event_sim_config(path, cfg, params, crop_window=None):
    path = Path(path)
    data_name = path.name + ".bin"
    write_tensor(path.parent / data_name, params.theta)
    lam_text = ",".join("%.17g" % v for v in params.lam.reshape(-1))
    lines = ["kind=event_sim",
             f"window={params.window[0]},{params.window[1]}",
             f"stride={params.stride}",
             "t_tilde=%.17g" % params.t_tilde,
             "lif_t_tilde=%.17g" % cfg.t_tilde,
             "v_thresh=%.17g" % cfg.v_thresh,
             "v_reset=%.17g" % cfg.v_reset,
             f"m_v={params.m_v}",
             f"q={params.num_in_channels}",
             f"p={params.num_out_channels}",
             f"lambda={lam_text}",
             f"data={data_name}"]
    if crop_window is not None:
        lines.append("crop_window=%.17g" % crop_window)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
