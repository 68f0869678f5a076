"""Multiple-kernel SVM with the (0,1) loss, trained by a working-set ADMM."""

from .admm import SolverError, SolverParams, SolverState, Trace, solve
from .data import (DataError, Dataset, NormStats, apply_normalizer,
                   fit_normalizer, load_dataset, make_folds, split, synth_2d)
from .kernels import DEFAULT_SIGMAS, KernelBank, build_bank, combine
from .model import (Model, ModelFormatError, accuracy, decision_values,
                    load_model, predict, save_model)
from .prox01 import ProxParams, prox_scalar, prox_vector
from .simplex import project_simplex
from .stationarity import StationarityReport, check_p_stationary

__version__ = "0.1.0"

__all__ = [
    "SolverError", "SolverParams", "SolverState", "Trace", "solve",
    "DataError", "Dataset", "NormStats", "apply_normalizer", "fit_normalizer",
    "load_dataset", "make_folds", "split", "synth_2d",
    "DEFAULT_SIGMAS", "KernelBank", "build_bank", "combine",
    "Model", "ModelFormatError", "accuracy", "decision_values", "load_model",
    "predict", "save_model",
    "ProxParams", "prox_scalar", "prox_vector",
    "project_simplex",
    "StationarityReport", "check_p_stationary",
]
