"""On-disk formats: SGF1 images, SGM1 masks and 16-bit PGM previews.

SGF1 layout::

    b"SGF1" | height:u32le | width:u32le | height*width float32le, row-major

SGM1 is identical except for the ``b"SGM1"`` magic and one byte per pixel
holding 0 or 1.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import as_image, as_mask

IMAGE_MAGIC = b"SGF1"
MASK_MAGIC = b"SGM1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


def _write(path, magic: bytes, shape: tuple[int, int], payload: bytes) -> None:
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, shape[0], shape[1]))
        fh.write(payload)


def _read(path, magic: bytes, itemsize: int) -> tuple[tuple[int, int], bytes]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for header")
    got, h, w = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != h * w * itemsize:
        raise FormatError(f"{path}: payload is {len(body)} bytes, expected {h * w * itemsize}")
    return (h, w), body


def write_image(path, img: np.ndarray) -> None:
    img = as_image(img)
    _write(path, IMAGE_MAGIC, img.shape, img.astype("<f4").tobytes())


def read_image(path) -> np.ndarray:
    shape, body = _read(path, IMAGE_MAGIC, 4)
    return np.frombuffer(body, dtype="<f4").reshape(shape).astype(np.float64)


def write_mask(path, mask: np.ndarray) -> None:
    mask = as_mask(mask)
    _write(path, MASK_MAGIC, mask.shape, mask.astype(np.uint8).tobytes())


def read_mask(path) -> np.ndarray:
    shape, body = _read(path, MASK_MAGIC, 1)
    return as_mask(np.frombuffer(body, dtype=np.uint8).reshape(shape))


def write_pgm(path, img: np.ndarray) -> None:
    """Binary P5 PGM at 16-bit depth (big-endian samples, maxval 65535)."""
    img = as_image(img)
    values = np.floor(np.clip(img, 0.0, 1.0) * 65535.0 + 0.5).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    path = Path(path)
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    path.write_bytes(header + values.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    # header: magic, width, height, maxval, then exactly one whitespace byte
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    dtype = np.dtype(">u2" if maxval > 255 else "u1")
    body = raw[pos + 1: pos + 1 + h * w * dtype.itemsize]
    return np.frombuffer(body, dtype=dtype).reshape(h, w) / maxval
