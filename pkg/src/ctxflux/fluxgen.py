"""Ground-truth context flux, region partition, class-balancing weights and loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dt import squared_edt_with_labels
from .morph import dilate, disk_se
from .raster import as_binary, as_flux, check_same_dims

DEFAULT_RADIUS = 7

BACKGROUND = 0
CONTEXT = 1
SKELETON = 2


@dataclass(frozen=True)
class RegionPartition:
    """Per-pixel region labels (``SKELETON``, ``CONTEXT`` or ``BACKGROUND``)."""

    labels: np.ndarray  # uint8, (h, w)

    @property
    def skeleton(self) -> np.ndarray:
        return self.labels == SKELETON

    @property
    def context(self) -> np.ndarray:
        return self.labels == CONTEXT

    @property
    def background(self) -> np.ndarray:
        return self.labels == BACKGROUND

    @property
    def n_skeleton(self) -> int:
        return int(np.count_nonzero(self.labels == SKELETON))

    @property
    def n_context(self) -> int:
        return int(np.count_nonzero(self.labels == CONTEXT))

    @property
    def n_background(self) -> int:
        return int(np.count_nonzero(self.labels == BACKGROUND))

    def counts(self) -> dict[str, int]:
        return {
            "skeleton": self.n_skeleton,
            "context": self.n_context,
            "background": self.n_background,
        }


def _check_radius(r: int) -> int:
    if int(r) != r or r < 1:
        raise ValueError(f"context radius must be an integer >= 1, got {r!r}")
    return int(r)


def _check_skeleton(skeleton) -> np.ndarray:
    skeleton = as_binary(skeleton)
    if not skeleton.any():
        raise ValueError("no skeleton pixels")
    return skeleton


def partition_regions(skeleton, r: int = DEFAULT_RADIUS) -> RegionPartition:
    """Split the grid into skeleton, context (disk-dilated ring) and background."""
    skeleton = _check_skeleton(skeleton)
    r = _check_radius(r)
    near = dilate(skeleton, disk_se(r))
    labels = np.full(skeleton.shape, BACKGROUND, dtype=np.uint8)
    labels[near] = CONTEXT
    labels[skeleton] = SKELETON
    return RegionPartition(labels)


def compute_context_flux(skeleton, r: int = DEFAULT_RADIUS) -> np.ndarray:
    """Unit vectors from each context pixel toward its nearest skeleton pixel.

    Skeleton and background pixels get ``(0, 0)``. Returns ``float64`` of
    shape ``(h, w, 2)``.
    """
    partition = partition_regions(skeleton, r)
    dist2, nearest = squared_edt_with_labels(partition.skeleton)
    ys, xs = np.nonzero(partition.context)
    dx = (nearest[ys, xs, 0] - xs).astype(np.float64)
    dy = (nearest[ys, xs, 1] - ys).astype(np.float64)
    norm = np.sqrt(dist2[ys, xs].astype(np.float64))
    flux = np.zeros(partition.labels.shape + (2,), dtype=np.float64)
    flux[ys, xs, 0] = dx / norm
    flux[ys, xs, 1] = dy / norm
    return flux


def class_weights(partition: RegionPartition) -> tuple[float, float]:
    """Return ``(w_foreground, w_background)``; foreground is context plus skeleton."""
    fg = partition.n_context + partition.n_skeleton
    bg = partition.n_background
    total = fg + bg
    return bg / total, fg / total


def pixel_weights(partition: RegionPartition) -> np.ndarray:
    w_fg, w_bg = class_weights(partition)
    return np.where(partition.background, w_bg, w_fg)


def weighted_l2_loss(pred, gt, weights, squared: bool = True) -> float:
    """Sum over pixels of ``w * ||gt - pred||**2`` (or the plain norm if not squared).

    Uses numpy's pairwise summation over a contiguous row-major buffer, so the
    result does not depend on how the inputs were produced.
    """
    pred = as_flux(pred)
    gt = as_flux(gt)
    weights = np.asarray(weights, dtype=np.float64)
    check_same_dims(pred, gt, weights)
    diff = gt - pred
    per_pixel = diff[..., 0] ** 2 + diff[..., 1] ** 2
    if not squared:
        per_pixel = np.sqrt(per_pixel)
    return float(np.sum(np.ascontiguousarray(weights * per_pixel).ravel()))
