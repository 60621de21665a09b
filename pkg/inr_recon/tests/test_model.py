"""Network architecture, activation properties, and the coordinate grid."""

import numpy as np
import pytest
import torch

from inr_recon import CoordinateGrid, FinerNet, InrConfig, finer_activation


def test_default_parameter_count_near_200k():
    cfg = InrConfig()
    count = cfg.parameter_count()
    assert count == 198_401
    assert 150_000 <= count <= 250_000
    model = FinerNet(cfg)
    assert sum(p.numel() for p in model.parameters()) == count


@pytest.mark.parametrize("kwargs", [
    dict(hidden_layers=0),
    dict(hidden_width=0),
    dict(iterations=0),
    dict(learning_rate=0.0),
    dict(learning_rate=-1e-3),
    dict(omega=0.0),
    dict(wavelet_reg_weight=-1.0),
    dict(dtype="float16"),
])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        InrConfig(**kwargs)


def test_activation_zero_at_zero():
    z = torch.zeros(5, dtype=torch.float64)
    assert torch.equal(finer_activation(z, omega=10.0), z)


def test_activation_odd_and_bounded():
    z = torch.linspace(-25.0, 25.0, 4001, dtype=torch.float64)
    out = finer_activation(z, omega=10.0)
    neg = finer_activation(-z, omega=10.0)
    assert torch.allclose(neg, -out, atol=1e-12)
    assert float(out.abs().max()) <= 1.0


def test_activation_period_shrinks_with_magnitude():
    # count sign changes in two windows of equal width: oscillation is
    # faster around |z| ~ 4 than around zero
    z_lo = torch.linspace(0.0, 1.0, 20001, dtype=torch.float64)
    z_hi = torch.linspace(4.0, 5.0, 20001, dtype=torch.float64)
    crossings = lambda v: int((torch.diff(torch.sign(v)) != 0).sum())
    assert crossings(finer_activation(z_hi)) > crossings(finer_activation(z_lo))


def test_grid_covers_every_pair_once():
    grid = CoordinateGrid(16, 256)
    coords = grid.coordinates()
    assert coords.shape == (16 * 256, 2)
    assert grid.size == 16 * 256
    assert len(np.unique(coords, axis=0)) == grid.size
    assert coords.min() == -1.0 and coords.max() == 1.0
    # channel-major ordering: first coordinate is constant along each row
    ch = coords[:, 0].reshape(16, 256)
    assert np.all(ch == ch[:, :1])
    t = coords[:, 1].reshape(16, 256)
    assert np.allclose(t, t[0])


def test_grid_rejects_empty():
    with pytest.raises(ValueError):
        CoordinateGrid(0, 16)


def test_init_is_seed_deterministic():
    a = FinerNet(InrConfig(seed=7))
    b = FinerNet(InrConfig(seed=7))
    c = FinerNet(InrConfig(seed=8))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert any(not torch.equal(pa, pc)
               for pa, pc in zip(a.parameters(), c.parameters()))


def test_forward_shape_and_dtype():
    model = FinerNet(InrConfig(hidden_layers=2, hidden_width=8, dtype="float64"))
    coords = torch.tensor(CoordinateGrid(4, 16).coordinates(), dtype=torch.float64)
    out = model(coords)
    assert out.shape == (64,)
    assert out.dtype == torch.float64
    assert torch.isfinite(out).all()
