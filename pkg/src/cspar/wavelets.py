"""Orthonormal Daubechies wavelet transforms with periodic extension.

The multi-level pyramid uses circular (periodized) convolution, which
keeps the transform exactly orthogonal for any even length at each
level: the quadrature-mirror conditions make wrapped filter shifts an
orthonormal set.  Coefficients are laid out coarse-first:
``[approx_L | detail_L | detail_{L-1} | ... | detail_1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# scaling (low-pass) filters; high-pass follows from the QMF relation
_DB4_H = np.array([
    0.230377813308855230, 0.714846570552541500, 0.630880767929590400,
    -0.027983769416983850, -0.187034811718881140, 0.030841381835986965,
    0.032883011666982945, -0.010597401784997278,
])


def _db2_h() -> np.ndarray:
    s3 = math.sqrt(3.0)
    return np.array([1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3]) / (4.0 * math.sqrt(2.0))


_FAMILIES = {
    "db2": _db2_h(),
    "db4": _DB4_H,
}


@dataclass(frozen=True)
class SparseBasis:
    """Orthonormal wavelet basis: family label plus decomposition depth."""

    family: str = "db4"
    levels: int = 4
    kind: str = "orthonormal wavelet"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown wavelet family {self.family!r}; choose from {sorted(_FAMILIES)}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @property
    def filters(self) -> tuple[np.ndarray, np.ndarray]:
        h = _FAMILIES[self.family]
        n = np.arange(h.size)
        g = ((-1.0) ** n) * h[::-1]
        return h, g

    def padded_length(self, length: int) -> int:
        block = 2 ** self.levels
        return ((length + block - 1) // block) * block


def _window_index(n: int, taps: int) -> np.ndarray:
    return (2 * np.arange(n // 2)[:, None] + np.arange(taps)[None, :]) % n


def _analysis_step(a: np.ndarray, h: np.ndarray, g: np.ndarray):
    idx = _window_index(a.shape[-1], h.size)
    win = a[..., idx]                      # (..., n/2, taps)
    return win @ h, win @ g


def _synthesis_step(approx: np.ndarray, detail: np.ndarray, h: np.ndarray, g: np.ndarray):
    n = 2 * approx.shape[-1]
    idx = _window_index(n, h.size)
    contrib = approx[..., :, None] * h + detail[..., :, None] * g
    lead = approx.shape[:-1]
    out = np.zeros(lead + (n,))
    flat_out = out.reshape(-1, n)
    flat_contrib = contrib.reshape(-1, *idx.shape)
    rows = np.arange(flat_out.shape[0])[:, None, None]
    np.add.at(flat_out, (rows, idx[None, :, :]), flat_contrib)
    return flat_out.reshape(lead + (n,))


def dwt_forward(x: np.ndarray, basis: SparseBasis = SparseBasis()) -> np.ndarray:
    """Multi-level forward transform along the last axis.

    Inputs whose length is not a multiple of ``2**levels`` are
    zero-padded up to it; ``dwt_inverse(..., length=...)`` undoes the
    padding.  Energy is preserved exactly (orthonormal pyramid).
    """
    x = np.asarray(x, dtype=np.float64)
    h, g = basis.filters
    t_pad = basis.padded_length(x.shape[-1])
    if t_pad < 2 ** basis.levels:
        raise ValueError(f"input length {x.shape[-1]} too short for {basis.levels} levels")
    if t_pad != x.shape[-1]:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, t_pad - x.shape[-1])]
        x = np.pad(x, pad)
    details = []
    a = x
    for _ in range(basis.levels):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return np.concatenate([a] + details[::-1], axis=-1)


def dwt_inverse(coeffs: np.ndarray, basis: SparseBasis = SparseBasis(),
                length: int | None = None) -> np.ndarray:
    """Inverse of :func:`dwt_forward`; optional truncation to ``length``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    h, g = basis.filters
    t_pad = coeffs.shape[-1]
    if t_pad % (2 ** basis.levels) != 0:
        raise ValueError(f"coefficient length {t_pad} not a multiple of 2**{basis.levels}")
    n_coarse = t_pad >> basis.levels
    a = coeffs[..., :n_coarse]
    offset = n_coarse
    for level in range(basis.levels, 0, -1):
        n_detail = t_pad >> level
        d = coeffs[..., offset:offset + n_detail]
        a = _synthesis_step(a, d, h, g)
        offset += n_detail
    if length is not None:
        a = a[..., :length]
    return a
