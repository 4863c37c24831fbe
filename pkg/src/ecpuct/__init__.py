"""Eddy-current pulse-compression thermography analysis chain.

Coded (Barker) induction heating is recovered as a per-pixel impulse
response by matched filtering; kernel PCA and a low-rank plus sparse
split enhance the defect; crossing points of defect and sound responses
give a depth feature.  ``synth`` provides a finite-volume plate model for
ground truth.
"""

from .datacube import Roi, ThermogramCube, read_tcube, reshape_to_matrix, write_tcube
from .excitation import barker_code, expand_code, matched_filter, virtual_delta
from .features import (ALUMINIUM_2024_T3, crossing_points, depth_calibration_table, max_snr,
                       skin_depth, snr_curve)
from .kpca import KernelConfig, run_kpca
from .lrs import LrsConfig, lrs_decompose, svt
from .pulsecomp import CompressionWindow, DetrendConfig, compress_cube, pulse_compress, remove_step_heating
from .synth import NotchSpec, PlateSpec, SourceModel, add_noise, reference_scene, simulate_cube

__version__ = "0.1.0"

__all__ = [
    "ALUMINIUM_2024_T3", "CompressionWindow", "DetrendConfig", "KernelConfig", "LrsConfig", "NotchSpec",
    "PlateSpec", "Roi", "SourceModel", "ThermogramCube", "add_noise", "barker_code", "compress_cube",
    "crossing_points", "depth_calibration_table", "expand_code", "lrs_decompose", "matched_filter",
    "max_snr", "pulse_compress", "read_tcube", "reference_scene", "remove_step_heating",
    "reshape_to_matrix", "run_kpca", "simulate_cube", "skin_depth", "snr_curve", "svt",
    "virtual_delta", "write_tcube",
]
