"""MAC, quantizer, capacitor bank, and oracle-equivalence tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cspar.matrices import MeasurementMatrix, block_diagonal, identity_schedule, random_ternary
from cspar.mvm_adc import (
    AdcConfig,
    CapBank,
    CompressedBlock,
    compress_block,
    dequantize,
    ideal_mvm,
    mac_sample,
    quantize,
    read_compressed_block,
    write_compressed_block,
)


def test_config_invariants():
    cfg = AdcConfig()
    assert cfg.total_unit_caps == cfg.channels_per_adc * cfg.unit_caps_per_channel
    assert cfg.lsb == 2.0 / 1024.0
    assert (cfg.code_min, cfg.code_max) == (-512, 511)
    with pytest.raises(ValueError):
        AdcConfig(bits=0)
    with pytest.raises(ValueError):
        AdcConfig(total_unit_caps=1000)
    with pytest.raises(ValueError):
        AdcConfig(cap_mismatch_sigma=-0.1)


def test_capbank_nominal_values():
    bank = CapBank.draw(AdcConfig(), row=0)
    assert np.array_equal(bank.channel_caps, np.full(16, 64.0))
    assert bank.total == 1024.0
    assert np.array_equal(bank.weights, np.full(16, 0.0625))


def test_capbank_mismatch_deterministic_per_row():
    cfg = AdcConfig(cap_mismatch_sigma=0.01, seed=5)
    b0 = CapBank.draw(cfg, 0)
    b0_again = CapBank.draw(cfg, 0)
    b1 = CapBank.draw(cfg, 1)
    assert np.array_equal(b0.channel_caps, b0_again.channel_caps)
    assert not np.array_equal(b0.channel_caps, b1.channel_caps)
    assert (b0.channel_caps > 0).all()
    # 64 units at 1% relative sigma: bank sigma = sqrt(64)*0.01 = 8%
    assert np.max(np.abs(b0.channel_caps - 64.0)) < 64.0 * 0.08 * 6


def test_mac_zero_weights():
    bank = CapBank.draw(AdcConfig(), 0)
    x = np.random.default_rng(0).standard_normal(16)
    assert mac_sample(x, np.zeros(16), bank) == 0.0


def test_mac_all_ones_equal_inputs():
    bank = CapBank.draw(AdcConfig(), 0)
    for a in (0.37, -1.25, 1e-4, 0.999):
        v = mac_sample(np.full(16, a), np.ones(16), bank)
        assert abs(v - a) <= 4 * math.ulp(abs(a))


def test_mac_single_weight():
    bank = CapBank.draw(AdcConfig(), 0)
    x = np.random.default_rng(1).standard_normal(16)
    for k in range(16):
        row = np.zeros(16)
        row[k] = 1.0
        assert mac_sample(x, row, bank) == x[k] / 16.0


def test_mac_linearity():
    bank = CapBank.draw(AdcConfig(cap_mismatch_sigma=0.02, seed=9), 2)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, 16))
    row = random_ternary(1, 16, 0.3, seed=4).entries[0]
    lhs = mac_sample(2.5 * x - 0.5 * y, row, bank)
    rhs = 2.5 * mac_sample(x, row, bank) - 0.5 * mac_sample(y, row, bank)
    assert abs(lhs - rhs) < 1e-14


def test_mac_affine_in_weight_sum():
    # common input a on every channel: output = a * sum(row_i * bank_i) / total
    cfg = AdcConfig(cap_mismatch_sigma=0.01, seed=3)
    bank = CapBank.draw(cfg, 0)
    a = 0.43
    for seed in range(5):
        row = random_ternary(1, 16, 0.25, seed=seed).entries[0].astype(float)
        want = a * float(np.dot(row, bank.channel_caps)) / bank.total
        assert abs(mac_sample(np.full(16, a), row, bank) - want) < 1e-15


def test_quantize_spec_points():
    cfg = AdcConfig()
    assert quantize(0.0, cfg) == 0
    assert quantize(cfg.full_scale - cfg.lsb / 2, cfg) == 511
    assert quantize(-cfg.full_scale - 1.0, cfg) == -512
    assert quantize(cfg.full_scale + 5.0, cfg) == 511
    assert quantize(-1e-12, cfg) == -1      # midrise: negatives start at -1


@given(v1=st.floats(-2, 2), v2=st.floats(-2, 2))
@settings(max_examples=200, deadline=None)
def test_quantize_monotone(v1, v2):
    cfg = AdcConfig()
    lo, hi = sorted((v1, v2))
    assert quantize(lo, cfg) <= quantize(hi, cfg)


def test_quantize_array_matches_scalar():
    cfg = AdcConfig(bits=8)
    v = np.linspace(-1.5, 1.5, 301)
    arr = quantize(v, cfg)
    assert arr.shape == v.shape
    for vi, ci in zip(v, arr):
        assert quantize(float(vi), cfg) == ci


def test_quantize_full_ladder():
    cfg = AdcConfig()
    centers = (np.arange(-512, 512) + 0.5) * cfg.lsb
    codes = quantize(centers, cfg)
    assert np.array_equal(codes, np.arange(-512, 512))


def test_dequantize_bin_centres():
    assert dequantize(np.array([0]), 2.0 / 1024)[0] == pytest.approx(1.0 / 1024)
    codes = np.array([-512, -1, 0, 511])
    v = dequantize(codes, 0.5)
    assert np.allclose(v, (codes + 0.5) * 0.5)


def test_compress_zero_signals():
    phi = random_ternary(4, 16, 0.3, seed=0)
    out = compress_block(np.zeros((16, 50)), phi, AdcConfig())
    assert out.codes.shape == (4, 50)
    assert not out.codes.any()


def test_compress_shape_and_rate_reduction():
    phi = random_ternary(4, 16, 0.33, seed=1)
    x = np.random.default_rng(0).uniform(-1, 1, (16, 1000))
    out = compress_block(x, phi, AdcConfig())
    assert out.codes.shape == (4, 1000)
    assert out.scale == AdcConfig().lsb
    assert out.matrix_id == phi.matrix_id


def test_compress_matches_oracle_bit_exact():
    cfg = AdcConfig()          # no mismatch, no comparator noise
    rng = np.random.default_rng(7)
    for trial in range(50):
        phi = random_ternary(4, 16, rng.uniform(0, 0.5), seed=100 + trial)
        x = rng.uniform(-1, 1, (16, 64))
        got = compress_block(x, phi, cfg).codes
        want = quantize(ideal_mvm(x, phi), cfg)
        assert np.array_equal(got, want)


def test_compress_deterministic_with_noise_sources():
    cfg = AdcConfig(cap_mismatch_sigma=0.02, comparator_noise_sigma=1e-3, seed=11)
    phi = random_ternary(4, 16, 0.3, seed=2)
    x = np.random.default_rng(3).uniform(-1, 1, (16, 200))
    a = compress_block(x, phi, cfg)
    b = compress_block(x, phi, cfg)
    assert np.array_equal(a.codes, b.codes)
    quiet = compress_block(x, phi, AdcConfig(cap_mismatch_sigma=0.02, seed=11))
    assert not np.array_equal(a.codes, quiet.codes)   # comparator noise flips some codes


def test_block_diagonal_compression_matches_per_chip():
    # the same chip presented at two scan positions, mismatch enabled
    cfg = AdcConfig(cap_mismatch_sigma=0.03, seed=21)
    b1 = random_ternary(4, 16, 0.3, seed=31)
    b2 = random_ternary(4, 16, 0.3, seed=32)
    big = block_diagonal([b1, b2])
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (32, 128))
    joint = compress_block(x, big, cfg).codes
    split = np.concatenate([compress_block(x[:16], b1, cfg).codes,
                            compress_block(x[16:], b2, cfg).codes])
    assert np.array_equal(joint, split)


def test_identity_schedule_roundtrip_within_one_lsb():
    cfg = AdcConfig()
    x = np.random.default_rng(5).uniform(-0.9, 0.9, (16, 200))
    rows = []
    for blk in identity_schedule(16, n_rows=4):
        out = compress_block(x, blk, cfg)
        rows.append(dequantize(out.codes, out.scale) * 16.0)
    xhat = np.concatenate(rows)
    channel_lsb = 16.0 * cfg.lsb
    assert np.max(np.abs(xhat - x)) <= channel_lsb / 2 + 1e-12


def test_ideal_mvm_identity_and_sign():
    x = np.random.default_rng(6).uniform(-1, 1, (16, 30))
    stacked = block_diagonal([MeasurementMatrix(np.eye(16, dtype=np.int8))])
    assert np.allclose(ideal_mvm(x, stacked), x / 16.0, atol=0)
    all_minus = MeasurementMatrix(-np.ones((1, 16), dtype=np.int8))
    a = 0.625
    v = ideal_mvm(np.full((16, 4), a), all_minus)
    assert np.allclose(v, -a, atol=1e-15)


def test_ideal_mvm_against_loop_oracle():
    rng = np.random.default_rng(8)
    phi = random_ternary(4, 16, 0.4, seed=55)
    x = rng.standard_normal((16, 20))
    got = ideal_mvm(x, phi)
    want = np.zeros((4, 20))
    for r in range(4):
        for t in range(20):
            acc = 0.0
            for i in range(16):
                acc += phi.entries[r, i] * x[i, t]
            want[r, t] = acc / 16.0
    assert np.allclose(got, want, atol=1e-12)


def test_compress_rejects_bad_shapes():
    phi = random_ternary(4, 16, 0.3, seed=0)
    with pytest.raises(ValueError):
        compress_block(np.zeros((15, 10)), phi, AdcConfig())
    row = np.zeros((1, 32), dtype=np.int8)
    row[0, 10] = 1
    row[0, 20] = 1          # support on two different chips
    with pytest.raises(ValueError, match="spans"):
        compress_block(np.zeros((32, 5)), MeasurementMatrix(row), AdcConfig())
    five = MeasurementMatrix(np.vstack([np.eye(5, 16, dtype=np.int8)[i] for i in range(5)]))
    with pytest.raises(ValueError, match="converters"):
        compress_block(np.zeros((16, 5)), five, AdcConfig())


def test_compressed_block_validation():
    with pytest.raises(ValueError, match="outside"):
        CompressedBlock(codes=np.array([[600]]), scale=0.01, matrix_id="x", bits=10)
    with pytest.raises(ValueError, match="scale"):
        CompressedBlock(codes=np.array([[0]]), scale=0.0, matrix_id="x")


def test_compressed_container_roundtrip(tmp_path):
    phi = random_ternary(4, 16, 0.3, seed=3)
    x = np.random.default_rng(9).uniform(-1, 1, (16, 77))
    blk = compress_block(x, phi, AdcConfig())
    path = tmp_path / "y.bin"
    write_compressed_block(path, blk, matrix_file="phi.json")
    back, mfile = read_compressed_block(path)
    assert np.array_equal(back.codes, blk.codes)
    assert back.scale == blk.scale and back.bits == blk.bits
    assert back.matrix_id == phi.matrix_id and mfile == "phi.json"
    first = (tmp_path / "y.bin").read_bytes(), (tmp_path / "y.json").read_bytes()
    write_compressed_block(path, blk, matrix_file="phi.json")
    assert ((tmp_path / "y.bin").read_bytes(), (tmp_path / "y.json").read_bytes()) == first
