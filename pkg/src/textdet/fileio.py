"""Shared on-disk formats: quad text files, the EASTTNSR binary tensor
container, and PGM/PPM images.

Quad files hold one region per line, "x1,y1,...,x4,y4[,score]" with LF
endings; coordinates are written with 3 decimals and scores with 6.
Tensor files carry a magic, a version, the rank and dims as little-endian
u32, then row-major little-endian float32 payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .geometry import Detection

TENSOR_MAGIC = b"EASTTNSR"
TENSOR_VERSION = 1


def format_quad_line(quad, score: float | None = None) -> str:
    q = np.asarray(quad, dtype=np.float64).reshape(8)
    fields = [f"{v:.3f}" for v in q]
    if score is not None:
        fields.append(f"{score:.6f}")
    return ",".join(fields)


def write_quad_file(path, records) -> None:
    """records: iterable of Detection or (quad, score|None) pairs."""
    lines = []
    for rec in records:
        if isinstance(rec, Detection):
            lines.append(format_quad_line(rec.quad, rec.score))
        else:
            quad, score = rec
            lines.append(format_quad_line(quad, score))
    Path(path).write_bytes(("".join(l + "\n" for l in lines)).encode("utf-8"))


def parse_quad_line(line: str, lineno: int = 0):
    parts = line.strip().split(",")
    if len(parts) not in (8, 9):
        raise FileFormatError(
            f"line {lineno}: expected 8 or 9 comma-separated fields, got {len(parts)}"
        )
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise FileFormatError(f"line {lineno}: {exc}") from None
    quad = np.array(vals[:8], dtype=np.float64).reshape(4, 2)
    score = vals[8] if len(vals) == 9 else None
    return quad, score


def read_quad_file(path):
    """Returns a list of (quad, score|None); skips blank lines."""
    out = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        out.append(parse_quad_line(line, i))
    return out


def write_tensor(path, array) -> None:
    a = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<II", TENSOR_VERSION, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(a.tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != TENSOR_MAGIC:
        raise FileFormatError("bad tensor magic")
    version, rank = struct.unpack_from("<II", raw, 8)
    if version != TENSOR_VERSION:
        raise FileFormatError(f"unsupported tensor version {version}")
    dims = struct.unpack_from(f"<{rank}I", raw, 16)
    payload = raw[16 + 4 * rank:]
    expected = 4 * int(np.prod(dims)) if rank else 4
    if len(payload) != expected:
        raise FileFormatError(
            f"truncated tensor payload: expected {expected} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def write_pgm(path, image) -> None:
    """8-bit binary PGM from a float array in [0, 1] or uint8."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise FileFormatError("not a binary PGM file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    img = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return img.astype(np.float64) / maxval


def write_ppm(path, image) -> None:
    """8-bit binary PPM from an (H, W, 3) float array in [0, 1] or uint8."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
