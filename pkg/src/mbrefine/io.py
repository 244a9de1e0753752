"""Readers and writers for flow fields, images, binary maps and CSV tables.

Byte-level functions (``read_flo``, ``write_flo``, ``read_kitti_flow``,
``encode_kitti_flow``, ``read_image``) work on ``bytes``; the ``load_*`` /
``save_*`` helpers wrap them for paths and dispatch on file extension.
"""

import csv
import enum
import struct
from pathlib import Path

import cv2
import numpy as np

FLO_MAGIC = 202021.25
FLO_MAX_DIM = 100_000
KITTI_OFFSET = 2 ** 15
KITTI_SCALE = 64.0


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


class TruncatedDataError(FormatError):
    pass


class DimensionError(FormatError):
    pass


class FlowFormat(enum.Enum):
    MIDDLEBURY_FLO = "flo"
    KITTI_PNG16 = "kitti"

    @classmethod
    def from_path(cls, path):
        suffix = Path(path).suffix.lower()
        if suffix == ".flo":
            return cls.MIDDLEBURY_FLO
        if suffix == ".png":
            return cls.KITTI_PNG16
        raise FormatError(f"{path}: cannot infer flow format from extension {suffix!r} (expected .flo or .png)")


# -- Middlebury .flo ---------------------------------------------------------

def read_flo(data):
    """Decode a Middlebury ``.flo`` stream into an ``(H, W, 2)`` float32 array."""
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedDataError("flo stream shorter than its 4-byte magic")
    (magic,) = struct.unpack("<f", data[:4])
    if magic != FLO_MAGIC:
        raise FormatError(f"bad flo magic {magic!r} (expected {FLO_MAGIC})")
    if len(data) < 12:
        raise TruncatedDataError("flo stream truncated inside its header")
    width, height = struct.unpack("<ii", data[4:12])
    if not (0 < width <= FLO_MAX_DIM and 0 < height <= FLO_MAX_DIM):
        raise DimensionError(f"flo dimensions {width}x{height} out of range")
    expected = 12 + 8 * width * height
    if len(data) < expected:
        raise TruncatedDataError(f"flo stream has {len(data)} bytes, expected {expected}")
    flow = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=12)
    return flow.reshape(height, width, 2).astype(np.float32)


def write_flo(flow):
    """Encode an ``(H, W, 2)`` flow as Middlebury ``.flo`` bytes (float32)."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2); got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("cannot write non-finite flow values to .flo")
    height, width = flow.shape[:2]
    header = struct.pack("<fii", FLO_MAGIC, width, height)
    return header + np.ascontiguousarray(flow, dtype="<f4").tobytes()


# -- KITTI 16-bit PNG --------------------------------------------------------

def read_kitti_flow(data):
    """Decode a KITTI 16-bit PNG flow.

    Returns ``(flow, valid)``: flow is ``(H, W, 2)`` float64, invalid pixels
    are set to zero.
    """
    raw = cv2.imdecode(np.frombuffer(bytes(data), dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError("not a decodable PNG")
    if raw.dtype != np.uint16 or raw.ndim != 3 or raw.shape[2] != 3:
        raise FormatError(f"KITTI flow must be a 16-bit 3-channel PNG; got dtype {raw.dtype}, shape {raw.shape}")
    # cv2 returns channels in BGR order: B = valid, G = v, R = u.
    valid = raw[:, :, 0] > 0
    u = (raw[:, :, 2].astype(np.float64) - KITTI_OFFSET) / KITTI_SCALE
    v = (raw[:, :, 1].astype(np.float64) - KITTI_OFFSET) / KITTI_SCALE
    flow = np.stack([u, v], axis=-1)
    flow[~valid] = 0.0
    return flow, valid


def encode_kitti_flow(flow, valid=None):
    """Encode a flow as KITTI 16-bit PNG bytes; out-of-range values saturate."""
    flow = np.asarray(flow, dtype=np.float64)
    if valid is None:
        valid = np.ones(flow.shape[:2], dtype=bool)
    finite = np.all(np.isfinite(flow), axis=-1)
    valid = np.asarray(valid, dtype=bool) & finite
    enc = np.rint(np.where(finite[..., None], flow, 0.0) * KITTI_SCALE + KITTI_OFFSET)
    enc = np.clip(enc, 0, 65535).astype(np.uint16)
    raw = np.empty(flow.shape[:2] + (3,), dtype=np.uint16)
    raw[:, :, 2] = enc[:, :, 0]
    raw[:, :, 1] = enc[:, :, 1]
    raw[:, :, 0] = valid.astype(np.uint16)
    ok, buf = cv2.imencode(".png", raw)
    if not ok:
        raise FormatError("PNG encoding failed")
    return buf.tobytes()


# -- images and binary maps --------------------------------------------------

def read_image(data):
    """Decode an 8-bit (or 16-bit) PNG/PPM/PGM into an ``(H, W, C)`` array in [0, 1]."""
    raw = cv2.imdecode(np.frombuffer(bytes(data), dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError("not a decodable image")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported image sample type {raw.dtype}")
    if raw.ndim == 2:
        raw = raw[:, :, None]
    elif raw.shape[2] == 4:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
    elif raw.shape[2] == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    else:
        raise FormatError(f"unsupported channel count {raw.shape[2]}")
    return raw.astype(np.float64) / scale


def encode_image(image, ext=".png"):
    """Encode an image in [0, 1] as 8-bit bytes (values are rounded)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    raw = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if raw.ndim == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_RGB2BGR)
    ok, buf = cv2.imencode(ext, raw)
    if not ok:
        raise FormatError(f"image encoding to {ext} failed")
    return buf.tobytes()


def load_image(path):
    try:
        return read_image(Path(path).read_bytes())
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_image(path, image):
    path = Path(path)
    path.write_bytes(encode_image(image, path.suffix or ".png"))


def write_binary_map(bmap, path):
    """Write a boolean map as an 8-bit PNG (false -> 0, true -> 255)."""
    raw = np.where(np.asarray(bmap, dtype=bool), 255, 0).astype(np.uint8)
    ok, buf = cv2.imencode(".png", raw)
    if not ok:
        raise FormatError("PNG encoding failed")
    Path(path).write_bytes(buf.tobytes())


def read_binary_map(path):
    """Read an 8-bit label map; any nonzero value is true."""
    raw = cv2.imdecode(np.frombuffer(Path(path).read_bytes(), dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"{path}: not a decodable image")
    if raw.ndim == 3:
        raw = raw.max(axis=2)
    return raw > 0


# -- flow files by path ------------------------------------------------------

def load_flow(path):
    """Read a ``.flo`` or KITTI ``.png`` flow; returns ``(flow, valid)``."""
    fmt = FlowFormat.from_path(path)
    data = Path(path).read_bytes()
    try:
        if fmt is FlowFormat.MIDDLEBURY_FLO:
            flow = read_flo(data).astype(np.float64)
            return flow, np.ones(flow.shape[:2], dtype=bool)
        return read_kitti_flow(data)
    except FormatError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def save_flow(path, flow, valid=None):
    fmt = FlowFormat.from_path(path)
    if fmt is FlowFormat.MIDDLEBURY_FLO:
        Path(path).write_bytes(write_flo(np.asarray(flow, dtype=np.float32)))
    else:
        Path(path).write_bytes(encode_kitti_flow(flow, valid))


# -- CSV ---------------------------------------------------------------------

def write_csv(path, header, rows):
    """Write ``rows`` under a header line; ``,`` separated, LF line endings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def read_csv(path):
    """Return ``(header, rows)`` with every cell as a string."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _csv_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
