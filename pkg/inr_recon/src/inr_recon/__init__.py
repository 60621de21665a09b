"""Implicit-neural-representation reconstruction for compressed blocks."""

from .cli import main, reconstruct_file
from .model import CoordinateGrid, FinerNet, InrConfig, finer_activation
from .train import TrainingError, data_fidelity, train_inr, wavelet_matrix

__version__ = "0.1.0"

__all__ = [
    "CoordinateGrid",
    "FinerNet",
    "InrConfig",
    "TrainingError",
    "data_fidelity",
    "finer_activation",
    "main",
    "reconstruct_file",
    "train_inr",
    "wavelet_matrix",
]
