"""Training behavior: fitting capacity, regularized null fit, gradients."""

from dataclasses import replace

import numpy as np
import pytest
import torch

from cspar import (AcousticConfig, AdcConfig, CompressedBlock,
                   MeasurementMatrix, TransducerArray, compress_block,
                   forward_simulate, generate_hair_phantom, identity_schedule,
                   quantize, random_ternary)
from inr_recon import InrConfig, TrainingError, data_fidelity, train_inr
from inr_recon.model import CoordinateGrid, FinerNet
from inr_recon.train import wavelet_matrix


def hair_block():
    """First scan position of the standard hair phantom, near full range."""
    block = forward_simulate(generate_hair_phantom(0), TransducerArray(),
                             AcousticConfig(num_samples=256))
    x = block.data
    return x * (0.9 / float(np.max(np.abs(x))))


@pytest.fixture(scope="module")
def identity_fit():
    """One full default training run against an identity-scheduled capture."""
    x = hair_block()
    adc = AdcConfig()
    cal = replace(adc, full_scale=adc.full_scale / 16.0)
    codes = np.vstack([compress_block(x, sub, cal).codes
                       for sub in identity_schedule(16)])
    eye = MeasurementMatrix(np.eye(16, dtype=np.int8))
    y = CompressedBlock(codes=codes, scale=cal.lsb, matrix_id=eye.matrix_id,
                        bits=adc.bits)
    return x, train_inr(y, eye)


def test_identity_capture_fit(identity_fit):
    x, res = identity_fit
    err = float(np.sum((res.estimates - x) ** 2) / np.sum(x * x))
    assert err < 1e-2
    assert res.estimates.shape == x.shape
    assert res.iterations_used == 400


def test_loss_trace_finite_and_smoothly_decreasing(identity_fit):
    _, res = identity_fit
    trace = np.asarray(res.objective_trace)
    assert len(trace) == res.iterations_used + 1
    assert np.all(np.isfinite(trace))
    assert res.final_objective == trace[-1]
    # means over consecutive 10-iteration windows never increase by more
    # than 1 percent, and the overall level drops by far more than half
    means = np.array([trace[i:i + 10].mean()
                      for i in range(0, len(trace) - 9, 10)])
    assert np.all(means[1:] <= means[:-1] * 1.01)
    assert means[-1] < 0.5 * means[0]


def test_regularized_null_fit():
    adc = AdcConfig()
    phi = random_ternary(4, 16, 1.0 / 3.0, 5)
    codes = quantize(np.zeros((4, 256)), adc)
    y = CompressedBlock(codes=codes, scale=adc.lsb, matrix_id=phi.matrix_id,
                        bits=adc.bits)
    res = train_inr(y, phi)
    norm = float(np.linalg.norm(res.estimates))
    assert norm < 1e-3 * CoordinateGrid(16, 256).size


def test_gradient_matches_finite_differences():
    cfg = InrConfig(hidden_layers=2, hidden_width=8, dtype="float64", seed=3)
    assert cfg.parameter_count() == 105
    model = FinerNet(cfg)
    coords = torch.tensor(CoordinateGrid(4, 16).coordinates(),
                          dtype=torch.float64)
    rng = np.random.default_rng(0)
    phi = torch.tensor(rng.choice([-1.0, 0.0, 1.0], size=(2, 4)),
                       dtype=torch.float64)
    target = torch.tensor(rng.normal(0.0, 0.05, (2, 16)), dtype=torch.float64)
    loss = data_fidelity(model, coords, phi, target, 4)
    loss.backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in model.parameters()]).numpy()
    h = 1e-6
    numeric = []
    with torch.no_grad():
        for p in model.parameters():
            flat = p.reshape(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + h
                hi = float(data_fidelity(model, coords, phi, target, 4))
                flat[i] = orig - h
                lo = float(data_fidelity(model, coords, phi, target, 4))
                flat[i] = orig
                numeric.append((hi - lo) / (2.0 * h))
    numeric = np.asarray(numeric)
    rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)
    assert rel < 1e-4


def test_wavelet_matrix_is_orthonormal():
    a = wavelet_matrix(256)
    assert np.max(np.abs(a @ a.T - np.eye(256))) < 1e-10


def test_nonfinite_loss_aborts_with_iteration():
    adc = AdcConfig()
    phi = random_ternary(4, 16, 1.0 / 3.0, 5)
    codes = quantize(np.zeros((4, 256)), adc)
    y = CompressedBlock(codes=codes, scale=adc.lsb, matrix_id=phi.matrix_id,
                        bits=adc.bits)
    with pytest.raises(TrainingError, match=r"iteration \d+"):
        train_inr(y, phi, InrConfig(learning_rate=1e30, iterations=5))


def test_row_mismatch_rejected():
    adc = AdcConfig()
    phi = random_ternary(2, 16, 1.0 / 3.0, 5)
    codes = quantize(np.zeros((4, 64)), adc)
    y = CompressedBlock(codes=codes, scale=adc.lsb, matrix_id=phi.matrix_id,
                        bits=adc.bits)
    with pytest.raises(ValueError, match="mismatched pairing"):
        train_inr(y, phi)
