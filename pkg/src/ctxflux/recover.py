"""Skeleton recovery from a context flux field, and its confidence map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .morph import close_asymmetric
from .raster import as_binary, as_flux, check_same_dims

# bin k points at the neighbour 45*k degrees from +x (y down)
DIRECTION_OFFSETS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_OFFSETS = np.array(DIRECTION_OFFSETS, dtype=np.intp)
_EIGHTH_TURN = math.pi / 4


@dataclass(frozen=True)
class RecoveryParams:
    lam: float = 0.4
    k1: int = 3
    k2: int = 4

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        for name in ("k1", "k2"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be an integer >= 0, got {value!r}")


class DirectionBin(NamedTuple):
    index: int
    offset: tuple[int, int]


def round_half_away(a):
    """Round to nearest integer, halves away from zero (``np.round`` rounds to even)."""
    return np.copysign(np.floor(np.abs(a) + 0.5), a)


def _bin_indices(fx, fy) -> np.ndarray:
    steps = round_half_away(np.arctan2(fy, fx) / _EIGHTH_TURN)
    return np.mod(steps.astype(np.intp), 8)


def bin_direction(v) -> DirectionBin:
    fx, fy = (float(c) for c in v)
    if fx == 0.0 and fy == 0.0:
        raise ValueError("no direction")
    k = int(_bin_indices(fx, fy))
    return DirectionBin(k, DIRECTION_OFFSETS[k])


def flux_endpoints(flux, lam: float = 0.4) -> np.ndarray:
    """Pixels whose magnitude exceeds ``lam`` but whose downstream neighbour's does not.

    The neighbour is the one the binned flux direction points at; neighbours
    off the grid count as magnitude 0.
    """
    flux = as_flux(flux)
    height, width = flux.shape[:2]
    mag = np.hypot(flux[..., 0], flux[..., 1])
    strong = mag > lam
    ys, xs = np.nonzero(strong)
    k = _bin_indices(flux[ys, xs, 0], flux[ys, xs, 1])
    nx = xs + _OFFSETS[k, 0]
    ny = ys + _OFFSETS[k, 1]
    inside = (nx >= 0) & (nx < width) & (ny >= 0) & (ny < height)
    weak = np.ones(len(ys), dtype=bool)
    weak[inside] = ~strong[ny[inside], nx[inside]]
    out = np.zeros((height, width), dtype=bool)
    out[ys[weak], xs[weak]] = True
    return out


def recover_skeleton(flux, params: RecoveryParams | None = None) -> np.ndarray:
    """Binary skeleton: flux endpoints grouped by dilation (k1) then erosion (k2)."""
    params = params or RecoveryParams()
    ends = flux_endpoints(flux, params.lam)
    return close_asymmetric(ends, params.k1, params.k2)


def confidence_map(flux, skeleton) -> np.ndarray:
    """``1 - min(1, |flux|)`` on skeleton pixels, 0 elsewhere."""
    flux = as_flux(flux)
    skeleton = as_binary(skeleton)
    check_same_dims(flux, skeleton)
    mag = np.hypot(flux[..., 0], flux[..., 1])
    return np.where(skeleton, 1.0 - np.minimum(1.0, mag), 0.0)
