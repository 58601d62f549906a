"""Binary file formats: PGM images, .smap saliency maps, .fcck checkpoints.

All floating-point payloads are little-endian float32. PGM follows the
Netpbm convention (16-bit samples are big-endian). Writers are fully
deterministic: identical inputs produce identical bytes.
"""

import json
import struct

import numpy as np

from .errors import ParseError

SMAP_MAGIC = b"SMAP"
CHECKPOINT_MAGIC = b"FCCK"


# ---------------------------------------------------------------------------
# PGM (grayscale images, 8- or 16-bit)

def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> None:
    """Write a [0,1] float image as binary PGM (P5)."""
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    q = np.round(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval == 65535 else "u1"
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.astype(dtype).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) into a [0,1] float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ParseError("not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"bad PGM header: {exc}") from exc
    if maxval <= 0 or maxval > 65535:
        raise ParseError(f"unsupported PGM maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    bytes_per = 2 if maxval > 255 else 1
    if len(data) - pos < count * bytes_per:
        raise ParseError("truncated PGM pixel data")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / maxval


# ---------------------------------------------------------------------------
# SMAP (dense saliency maps)

def write_smap(path, values: np.ndarray) -> None:
    """Write a saliency map: magic 'SMAP', u32le width/height, f32le row-major."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("saliency map must be 2-D")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(SMAP_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(arr.astype("<f4").tobytes())


def read_smap(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SMAP_MAGIC:
        raise ParseError("not an SMAP file (bad magic)")
    if len(data) < 12:
        raise ParseError("truncated SMAP header")
    width, height = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * width * height
    if len(data) != expected:
        raise ParseError(f"SMAP payload size mismatch: {len(data)} != {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=12, count=width * height)
    return values.reshape(height, width).astype(np.float64)


# ---------------------------------------------------------------------------
# FCCK (encoder checkpoints: config JSON + named float32 tensors)

def write_checkpoint(path, config: dict, tensors: dict) -> None:
    """Write magic 'FCCK', u32 version, length-prefixed config JSON, tensors.

    Each tensor record: u16 name length, name UTF-8, u8 ndim, u32le dims,
    f32le data. Tensors are written in sorted-name order so output bytes do
    not depend on dict insertion order.
    """
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.astype("<f4").tobytes())


def read_checkpoint(path):
    """Return (config dict, {name: float64 array})."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ParseError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != 1:
        raise ParseError(f"unsupported checkpoint version {version}")
    (config_len,) = struct.unpack_from("<I", data, 8)
    pos = 12
    config = json.loads(data[pos : pos + config_len].decode("utf-8"))
    pos += config_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(data, dtype="<f4", offset=pos, count=size)
        pos += 4 * size
        tensors[name] = values.reshape(shape).astype(np.float64)
    return config, tensors
