"""Raster conventions and file I/O.

All rasters are numpy arrays indexed ``[row, column]``. A pixel addressed as
``(x, y)`` lives at ``arr[y, x]``: x grows to the right, y grows downward.

* binary map  -- ``bool`` array of shape ``(height, width)``
* scalar map  -- ``float64`` array of shape ``(height, width)``
* flux field  -- ``float`` array of shape ``(height, width, 2)`` holding
  ``(fx, fy)`` per pixel
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np

FLUX_MAGIC = b"FLX1"
FLUX_HEADER = struct.Struct("<4sII8x")
# width*height above this is rejected before allocating anything
MAX_PIXELS = 1 << 28
BINARY_THRESHOLD = 128


class RasterFormatError(ValueError):
    """Base class for malformed raster files."""


class MalformedImageError(RasterFormatError):
    def __init__(self, detail: str = ""):
        super().__init__("malformed image" + (f": {detail}" if detail else ""))


class UnsupportedDepthError(RasterFormatError):
    def __init__(self, detail: str = ""):
        super().__init__("unsupported bit depth" + (f": {detail}" if detail else ""))


class BadMagicError(RasterFormatError):
    def __init__(self, magic: bytes):
        super().__init__(f"bad magic: {magic!r}")


class DimensionOverflowError(RasterFormatError):
    def __init__(self, width: int, height: int):
        super().__init__(f"dimension overflow: {width}x{height}")


class LengthMismatchError(RasterFormatError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"length mismatch: expected {expected} bytes, got {actual}")


class GridDims(NamedTuple):
    width: int
    height: int

    @classmethod
    def of(cls, arr: np.ndarray) -> "GridDims":
        return cls(int(arr.shape[1]), int(arr.shape[0]))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


def at(arr: np.ndarray, x: int, y: int):
    """Value of the pixel at column ``x``, row ``y``."""
    return arr[y, x]


def check_same_dims(*arrays: np.ndarray) -> GridDims:
    dims = {GridDims.of(a) for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def as_binary(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=bool)
    if out.ndim != 2 or out.size == 0:
        raise ValueError(f"binary map must be a non-empty 2D array, got shape {out.shape}")
    return out


def as_flux(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 3 or out.shape[2] != 2 or out.shape[0] == 0 or out.shape[1] == 0:
        raise ValueError(f"flux field must have shape (h, w, 2), got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("flux field contains non-finite components")
    return out


def magnitude(flux: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean norm of a flux field."""
    flux = as_flux(flux)
    return np.hypot(flux[..., 0], flux[..., 1])


# -- PGM / PNG ---------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens: list[bytes] = []
    i, n = 0, len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise MalformedImageError("truncated header")
        tokens.append(data[start:i])
    if i >= n:
        raise MalformedImageError("truncated header")
    return tokens, i


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM into a ``uint8`` array."""
    tokens, end = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise MalformedImageError(f"not a P5 PGM (magic {tokens[0][:8]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedImageError("non-integer header field") from None
    if width < 1 or height < 1:
        raise MalformedImageError(f"invalid size {width}x{height}")
    if width * height > MAX_PIXELS:
        raise DimensionOverflowError(width, height)
    if maxval != 255:
        raise UnsupportedDepthError(f"maxval {maxval}, only 255 is supported")
    payload = data[end + 1 :]
    if len(payload) < width * height:
        raise MalformedImageError(
            f"truncated pixel data ({len(payload)} of {width * height} bytes)"
        )
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width)


def encode_pgm(gray: np.ndarray) -> bytes:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    height, width = gray.shape
    return b"P5\n%d %d\n255\n" % (width, height) + gray.tobytes()


def _decode_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - depends on the environment
        raise RasterFormatError("PNG support requires Pillow (pip install artifact[png])") from None
    with Image.open(path) as img:
        if img.mode in ("L", "1", "P"):
            return np.asarray(img.convert("L"), dtype=np.uint8)
        if img.mode in ("I;16", "I;16B", "I", "F", "LA", "RGB", "RGBA"):
            raise UnsupportedDepthError(f"PNG mode {img.mode!r}, need 8-bit grayscale")
        raise UnsupportedDepthError(f"PNG mode {img.mode!r}")


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (or PNG, if Pillow is installed)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(path)
    return decode_pgm(data)


def read_binary_map(path) -> np.ndarray:
    """Read an image and binarize it at ``value >= 128``."""
    return read_gray(path) >= BINARY_THRESHOLD


def write_gray(gray: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_pgm(gray))


def write_binary_map(bmap: np.ndarray, path) -> None:
    bmap = as_binary(bmap)
    write_gray(np.where(bmap, 255, 0).astype(np.uint8), path)


# -- FLX1 flux files ---------------------------------------------------------


def encode_flux(flux: np.ndarray) -> bytes:
    flux = as_flux(flux)
    height, width = flux.shape[:2]
    header = FLUX_HEADER.pack(FLUX_MAGIC, width, height)
    return header + np.ascontiguousarray(flux, dtype="<f4").tobytes()


def decode_flux(data: bytes) -> np.ndarray:
    """Decode an FLX1 buffer into a ``float32`` array of shape ``(h, w, 2)``."""
    if len(data) < FLUX_HEADER.size:
        raise LengthMismatchError(FLUX_HEADER.size, len(data))
    magic, width, height = FLUX_HEADER.unpack_from(data)
    if magic != FLUX_MAGIC:
        raise BadMagicError(magic)
    if width < 1 or height < 1 or width * height > MAX_PIXELS:
        raise DimensionOverflowError(width, height)
    expected = FLUX_HEADER.size + 8 * width * height
    if len(data) != expected:
        raise LengthMismatchError(expected, len(data))
    flux = np.frombuffer(data, dtype="<f4", offset=FLUX_HEADER.size)
    flux = flux.reshape(height, width, 2).astype(np.float32)
    if not np.all(np.isfinite(flux)):
        raise RasterFormatError("flux file contains non-finite components")
    return flux


def read_flux(path) -> np.ndarray:
    return decode_flux(Path(path).read_bytes())


def write_flux(flux: np.ndarray, path) -> None:
    data = encode_flux(flux)
    with open(os.fspath(path), "wb") as fh:
        fh.write(data)
