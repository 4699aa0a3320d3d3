"""Quantum embedding kernels: simulation, alignment training, noise
post-processing and SVM classification."""

from .alignment import (TrainConfig, TrainHistory, hs_class_distance, matrix_alignment, polarity,
                        target_alignment, train_alignment)
from .embedding import AnsatzShape, build_embedding, embedded_states, random_parameters
from .exceptions import (DimensionError, IndefiniteKernel, MitigationInfeasible, NonConvergence,
                         TrainingError, Undecided)
from .kernel import (KernelMatrix, ShotConfig, cross_kernel_matrix, global_depolarized_matrix,
                     kernel_matrix, operator_norm_error_scan, spectral_norm)
from .postprocess import (Strategy, apply_strategy, enumerate_strategies, rank_strategies,
                          regularize_sdp, regularize_threshold, regularize_tikhonov)
from .simulator import Circuit, Gate, NoiseModel
from .svm import SVMModel

__version__ = "0.1.0"

__all__ = [
    "AnsatzShape", "Circuit", "DimensionError", "Gate", "IndefiniteKernel", "KernelMatrix",
    "MitigationInfeasible", "NoiseModel", "NonConvergence", "SVMModel", "ShotConfig", "Strategy",
    "TrainConfig", "TrainHistory", "TrainingError", "Undecided", "apply_strategy",
    "build_embedding", "cross_kernel_matrix", "embedded_states", "enumerate_strategies",
    "global_depolarized_matrix", "hs_class_distance", "kernel_matrix", "matrix_alignment",
    "operator_norm_error_scan", "polarity", "random_parameters", "rank_strategies",
    "regularize_sdp", "regularize_threshold", "regularize_tikhonov", "spectral_norm",
    "target_alignment", "train_alignment",
]
