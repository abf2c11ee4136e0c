"""File formats: binary PPM/PGM rasters and flat little-endian model files."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import DomainError


def _to_bytes(a):
    return np.clip(np.round(np.asarray(a, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, image):
    """Write an (H, W, 3) float image in [0, 1] as binary P6."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DomainError("PPM images must have shape (H, W, 3)")
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(_to_bytes(img).tobytes())


def write_pgm(path, gray, scaled=True):
    """Write a 2D array as binary P5.

    ``scaled`` maps [0, 1] values to 0..255; otherwise values are written as
    integer gray levels directly (clipped to 0..255).
    """
    g = np.asarray(gray)
    if g.ndim != 2:
        raise DomainError("PGM images must be 2D")
    h, w = g.shape
    data = _to_bytes(g) if scaled else np.clip(g, 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def _read_netpbm(path, magic):
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise DomainError(f"{path}: expected {magic.decode()} file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise DomainError(f"{path}: only maxval 255 is supported")
    return w, h, data[pos + 1 :]


def read_ppm(path):
    w, h, raw = _read_netpbm(path, b"P6")
    return np.frombuffer(raw[: w * h * 3], dtype=np.uint8).reshape(h, w, 3) / 255.0


def read_pgm(path, scaled=True):
    w, h, raw = _read_netpbm(path, b"P5")
    g = np.frombuffer(raw[: w * h], dtype=np.uint8).reshape(h, w)
    return g / 255.0 if scaled else g.astype(np.int64)


# flat binary model files: 8-byte magic, uint64 header fields, float64 payload


def write_flat(path, magic, header, arrays, trailer=b""):
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<Q", len(header)))
        f.write(struct.pack("<%dQ" % len(header), *header))
        for a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        f.write(struct.pack("<Q", len(trailer)))
        f.write(trailer)


def read_flat(path, magic, sizes_from_header):
    """Read a flat model file; ``sizes_from_header(header)`` gives array shapes."""
    data = Path(path).read_bytes()
    if data[:8] != magic:
        raise DomainError(f"{path}: bad magic {data[:8]!r}, expected {magic!r}")
    (nh,) = struct.unpack_from("<Q", data, 8)
    header = struct.unpack_from("<%dQ" % nh, data, 16)
    pos = 16 + 8 * nh
    arrays = []
    for shape in sizes_from_header(header):
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).copy())
        pos += 8 * n
    (nt,) = struct.unpack_from("<Q", data, pos)
    trailer = data[pos + 8 : pos + 8 + nt]
    return header, arrays, trailer


def write_csv(path, header, rows, comment=""):
    """Write rows under a header; ``comment`` lines (starting with ``#``) go first."""
    with open(path, "w", newline="") as f:
        f.write(comment)
        wr = csv.writer(f)
        if header:
            wr.writerow(header)
        wr.writerows(rows)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))
