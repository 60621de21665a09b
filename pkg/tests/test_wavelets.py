"""Wavelet transform invariants: filter identities, energy, roundtrip."""

import math

import numpy as np
import pytest

from cspar.wavelets import SparseBasis, dwt_forward, dwt_inverse


@pytest.mark.parametrize("family,taps", [("db2", 4), ("db4", 8)])
def test_filter_identities(family, taps):
    h, g = SparseBasis(family=family, levels=1).filters
    assert h.size == taps and g.size == taps
    assert abs(h.sum() - math.sqrt(2.0)) < 1e-12
    assert abs(g.sum()) < 1e-12
    # double-shift orthonormality of the low-pass filter
    for m in range(taps // 2):
        dot = np.dot(h[2 * m:], h[:taps - 2 * m])
        assert abs(dot - (1.0 if m == 0 else 0.0)) < 1e-12
    # low/high-pass orthogonality at even shifts
    for m in range(-(taps // 2) + 1, taps // 2):
        a = h if m >= 0 else g
        b = g if m >= 0 else h
        k = abs(2 * m)
        assert abs(np.dot(a[k:], b[:taps - k])) < 1e-12


@pytest.mark.parametrize("family", ["db2", "db4"])
@pytest.mark.parametrize("levels,n", [(1, 2), (1, 16), (2, 4), (3, 24), (4, 64), (4, 2048)])
def test_orthonormal_roundtrip(family, levels, n):
    rng = np.random.default_rng(7)
    x = rng.standard_normal(n)
    basis = SparseBasis(family=family, levels=levels)
    c = dwt_forward(x, basis)
    assert c.shape[-1] == basis.padded_length(n)
    if n == basis.padded_length(n):
        assert abs(np.sum(c * c) - np.sum(x * x)) < 1e-10 * max(1.0, np.sum(x * x))
    back = dwt_inverse(c, basis, length=n)
    assert np.max(np.abs(back - x)) < 1e-10


def test_transform_is_orthogonal_matrix():
    basis = SparseBasis(levels=3)
    n = 32
    w = dwt_forward(np.eye(n), basis)      # rows are transforms of basis vectors
    gram = w @ w.T
    assert np.max(np.abs(gram - np.eye(n))) < 1e-10


def test_batched_matches_single():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((5, 48))
    basis = SparseBasis(levels=2)
    batch = dwt_forward(x, basis)
    for i in range(5):
        assert np.max(np.abs(batch[i] - dwt_forward(x[i], basis))) < 1e-12
    back = dwt_inverse(batch, basis, length=48)
    assert np.max(np.abs(back - x)) < 1e-10


def test_padding_roundtrip():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(100)           # not a multiple of 16
    basis = SparseBasis(levels=4)
    c = dwt_forward(x, basis)
    assert c.shape[-1] == 112
    assert np.max(np.abs(dwt_inverse(c, basis, length=100) - x)) < 1e-10


def test_constant_signal_concentrates_in_approx():
    basis = SparseBasis(levels=4)
    c = dwt_forward(np.ones(64), basis)
    n_coarse = 64 >> 4
    assert np.max(np.abs(c[n_coarse:])) < 1e-10
    assert abs(np.sum(c[:n_coarse] ** 2) - 64.0) < 1e-10


def test_zero_and_linearity():
    basis = SparseBasis(levels=2)
    assert np.array_equal(dwt_forward(np.zeros(16), basis), np.zeros(16))
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal((2, 16))
    lhs = dwt_forward(2.0 * a - 3.0 * b, basis)
    rhs = 2.0 * dwt_forward(a, basis) - 3.0 * dwt_forward(b, basis)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_rejects_bad_config():
    with pytest.raises(ValueError):
        SparseBasis(family="haar9", levels=1)
    with pytest.raises(ValueError):
        SparseBasis(levels=0)
    with pytest.raises(ValueError):
        dwt_inverse(np.zeros(20), SparseBasis(levels=3))
