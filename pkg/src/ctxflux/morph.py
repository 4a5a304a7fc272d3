"""Binary morphology with Euclidean disk structuring elements.

Pixels outside the grid count as false for both dilation and erosion, so
erosion eats inward from the image border.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .raster import as_binary


@dataclass(frozen=True)
class StructuringElement:
    radius: int
    offsets: tuple[tuple[int, int], ...]  # (dx, dy)

    def __len__(self) -> int:
        return len(self.offsets)

    def __contains__(self, offset) -> bool:
        return tuple(offset) in self.offsets


@lru_cache(maxsize=64)
def disk_se(radius: int) -> StructuringElement:
    """All integer offsets with ``dx**2 + dy**2 <= radius**2``."""
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    r2 = radius * radius
    offsets = tuple(
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= r2
    )
    return StructuringElement(radius, offsets)


def _as_se(se) -> StructuringElement:
    return se if isinstance(se, StructuringElement) else disk_se(se)


def _shifted_views(height: int, width: int, dx: int, dy: int):
    """Slices such that ``out[dst] <- src[src_slice]`` reads ``src[y+dy, x+dx]``."""
    ys, yd = (slice(dy, height), slice(0, height - dy)) if dy >= 0 else (
        slice(0, height + dy), slice(-dy, height))
    xs, xd = (slice(dx, width), slice(0, width - dx)) if dx >= 0 else (
        slice(0, width + dx), slice(-dx, width))
    return (ys, xs), (yd, xd)


def dilate(bmap, se) -> np.ndarray:
    """``out[p]`` is true iff ``bmap[p - o]`` is true for some offset ``o``."""
    bmap = as_binary(bmap)
    se = _as_se(se)
    height, width = bmap.shape
    out = np.zeros_like(bmap)
    for dx, dy in se.offsets:
        if abs(dx) >= width or abs(dy) >= height:
            continue
        # reading bmap at p - o
        src, dst = _shifted_views(height, width, -dx, -dy)
        out[dst] |= bmap[src]
    return out


def erode(bmap, se) -> np.ndarray:
    """``out[p]`` is true iff ``bmap[p + o]`` is in-bounds and true for every ``o``."""
    bmap = as_binary(bmap)
    se = _as_se(se)
    height, width = bmap.shape
    out = bmap.copy()
    for dx, dy in se.offsets:
        if abs(dx) >= width or abs(dy) >= height:
            return np.zeros_like(bmap)
        src, dst = _shifted_views(height, width, dx, dy)
        shifted = np.zeros_like(bmap)
        shifted[dst] = bmap[src]
        out &= shifted
    return out


def close_asymmetric(bmap, k1: int, k2: int) -> np.ndarray:
    """Dilate with a radius-``k1`` disk, then erode with a radius-``k2`` disk.

    With ``k2 > k1`` this is not a true closing and is not idempotent.
    """
    return erode(dilate(bmap, disk_se(k1)), disk_se(k2))
