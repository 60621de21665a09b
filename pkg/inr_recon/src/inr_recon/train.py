"""Training loop: fit the coordinate MLP through derived measurements.

The network is never shown the block it represents.  Each iteration
evaluates it on the full coordinate grid, pushes the predicted block
through the fixed ternary measurement operator (including the 1/16
charge-sharing scale of the converter), and penalizes the squared
error against the de-quantized codes plus an L1 wavelet-sparsity
term on the prediction itself.  The orthonormal wavelet transform is
applied as a constant matrix so the whole loss is differentiable.
"""

from __future__ import annotations

import numpy as np
import torch

from cspar import CompressedBlock, MeasurementMatrix, ReconstructedBlock, dequantize, dwt_forward

from .model import CoordinateGrid, FinerNet, InrConfig


class TrainingError(ValueError):
    """Raised when optimization cannot continue (non-finite loss)."""


def wavelet_matrix(samples: int) -> np.ndarray:
    """Orthonormal analysis matrix A with dwt_forward(X) == X @ A."""
    return dwt_forward(np.eye(samples))


def data_fidelity(model: FinerNet, coords: torch.Tensor, phi: torch.Tensor,
                  target: torch.Tensor, channels: int) -> torch.Tensor:
    """Squared error between (1/16) Phi X_hat and the de-quantized codes."""
    block = model(coords).reshape(channels, -1)
    measured = (phi @ block) / 16.0
    return torch.sum((measured - target) ** 2)


def train_inr(y: CompressedBlock, phi: MeasurementMatrix,
              cfg: InrConfig | None = None) -> ReconstructedBlock:
    """Fit the implicit representation to one compressed block.

    Returns the final full-grid evaluation in the standard
    reconstruction container; the objective trace holds the total
    loss at the initial weights and after every update (length
    ``iterations + 1``) and the ``lam`` field records the wavelet
    regularization weight.
    """
    cfg = cfg or InrConfig()
    if y.n_rows != phi.n_rows:
        raise ValueError(f"codes have {y.n_rows} rows but matrix has "
                         f"{phi.n_rows}; mismatched pairing")
    dtype = cfg.torch_dtype
    channels, samples = phi.m_cols, y.num_samples
    grid = CoordinateGrid(channels, samples)
    coords = torch.tensor(grid.coordinates(), dtype=dtype)
    phi_t = torch.tensor(np.array(phi.entries), dtype=dtype)
    target = torch.tensor(dequantize(y.codes, y.scale), dtype=dtype)
    basis = torch.tensor(wavelet_matrix(samples), dtype=dtype)

    model = FinerNet(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    def total_loss() -> torch.Tensor:
        block = model(coords).reshape(channels, samples)
        measured = (phi_t @ block) / 16.0
        data = torch.sum((measured - target) ** 2)
        reg = cfg.wavelet_reg_weight * torch.sum(torch.abs(block @ basis))
        return data + reg

    trace = []
    for iteration in range(cfg.iterations):
        optimizer.zero_grad()
        loss = total_loss()
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {iteration}")
        trace.append(float(loss.detach()))
        loss.backward()
        optimizer.step()
    with torch.no_grad():
        final = total_loss()
        if not torch.isfinite(final):
            raise TrainingError(f"non-finite loss at iteration {cfg.iterations}")
        trace.append(float(final))
        estimates = model(coords).reshape(channels, samples)
    return ReconstructedBlock(
        estimates=estimates.double().numpy(),
        iterations_used=cfg.iterations,
        final_objective=trace[-1],
        lam=cfg.wavelet_reg_weight,
        objective_trace=tuple(trace),
    )
