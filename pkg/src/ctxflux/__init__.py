"""Context-flux skeleton representation: ground truth, recovery and evaluation."""

__version__ = "0.1.0"

from .binflux import AofParams, average_outward_flux, interior_edt, skeletonize_binary
from .dt import euclidean_dt, euclidean_dt_with_labels
from .evaluation import EvalReport, f_measure, match_with_tolerance, pr_curve
from .fluxgen import (
    RegionPartition,
    compute_context_flux,
    partition_regions,
    pixel_weights,
    weighted_l2_loss,
)
from .morph import close_asymmetric, dilate, disk_se, erode
from .raster import magnitude, read_binary_map, read_flux, write_binary_map, write_flux
from .recover import RecoveryParams, bin_direction, confidence_map, recover_skeleton
from .synth import PerturbSpec, ShapeSpec, make_shape, perturb_flux, sweep_context_radius

__all__ = [
    "AofParams",
    "EvalReport",
    "PerturbSpec",
    "RecoveryParams",
    "RegionPartition",
    "ShapeSpec",
    "average_outward_flux",
    "bin_direction",
    "close_asymmetric",
    "compute_context_flux",
    "confidence_map",
    "dilate",
    "disk_se",
    "erode",
    "euclidean_dt",
    "euclidean_dt_with_labels",
    "f_measure",
    "interior_edt",
    "magnitude",
    "make_shape",
    "match_with_tolerance",
    "partition_regions",
    "perturb_flux",
    "pixel_weights",
    "pr_curve",
    "read_binary_map",
    "read_flux",
    "recover_skeleton",
    "skeletonize_binary",
    "sweep_context_radius",
    "weighted_l2_loss",
    "write_binary_map",
    "write_flux",
]
