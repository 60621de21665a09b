"""Hot numeric kernels with optional numba acceleration.

Each kernel exists twice: a plain-numpy implementation and a numba
``@njit`` version compiled from the same loop nest.  The active path is
chosen at import time: numba is used when it is importable and the
environment variable ``CSPAR_DISABLE_NUMBA`` is unset (or "0").  Both
paths stay importable so tests and benchmarks can compare them.

Numerical contract: within one selected path, repeated calls are
bit-identical.  Across paths, results agree to floating-point roundoff
(summation order differs between BLAS and the explicit loops).
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLE = os.environ.get("CSPAR_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:  # pragma: no cover - exercised indirectly via the selected path
    if _DISABLE:
        raise ImportError("numba disabled by CSPAR_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLE


# ---------------------------------------------------------------------------
# forward acoustic accumulation
# ---------------------------------------------------------------------------

def _forward_loops(traces, el_pos, src_pos, src_amp, c_mmus, fs_mhz,
                   f_c_mhz, sigma_us, eps_mm, atten_db_cm_mhz):
    """Accumulate band-limited spherical-wave arrivals into traces.

    traces : (M, T) float64, modified in place
    el_pos : (M, 3) mm, src_pos : (A, 3) mm, src_amp : (A,)
    Pulse support is truncated at +-6 sigma (relative tail < 2e-8).
    """
    n_el = el_pos.shape[0]
    n_src = src_pos.shape[0]
    n_t = traces.shape[1]
    two_pi_f = 2.0 * math.pi * f_c_mhz
    inv_two_sig2 = 1.0 / (2.0 * sigma_us * sigma_us)
    half_width = 6.0 * sigma_us
    for e in range(n_el):
        for a in range(n_src):
            dx = src_pos[a, 0] - el_pos[e, 0]
            dy = src_pos[a, 1] - el_pos[e, 1]
            dz = src_pos[a, 2] - el_pos[e, 2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            delay = dist / c_mmus
            amp = src_amp[a] / max(dist, eps_mm)
            if atten_db_cm_mhz > 0.0:
                amp *= 10.0 ** (-atten_db_cm_mhz * f_c_mhz * (dist / 10.0) / 20.0)
            k0 = int(math.ceil((delay - half_width) * fs_mhz))
            k1 = int(math.floor((delay + half_width) * fs_mhz))
            if k0 < 0:
                k0 = 0
            if k1 > n_t - 1:
                k1 = n_t - 1
            for k in range(k0, k1 + 1):
                td = k / fs_mhz - delay
                traces[e, k] += amp * math.cos(two_pi_f * td) * math.exp(-td * td * inv_two_sig2)
    return traces


def _forward_numpy(traces, el_pos, src_pos, src_amp, c_mmus, fs_mhz,
                   f_c_mhz, sigma_us, eps_mm, atten_db_cm_mhz):
    n_t = traces.shape[1]
    two_pi_f = 2.0 * np.pi * f_c_mhz
    inv_two_sig2 = 1.0 / (2.0 * sigma_us * sigma_us)
    half_width = 6.0 * sigma_us
    for e in range(el_pos.shape[0]):
        d = src_pos - el_pos[e]                      # (A, 3)
        dist = np.sqrt(np.sum(d * d, axis=1))        # (A,)
        delay = dist / c_mmus
        amp = src_amp / np.maximum(dist, eps_mm)
        if atten_db_cm_mhz > 0.0:
            amp = amp * 10.0 ** (-atten_db_cm_mhz * f_c_mhz * (dist / 10.0) / 20.0)
        for a in range(src_pos.shape[0]):
            k0 = max(0, int(np.ceil((delay[a] - half_width) * fs_mhz)))
            k1 = min(n_t - 1, int(np.floor((delay[a] + half_width) * fs_mhz)))
            if k1 < k0:
                continue
            td = np.arange(k0, k1 + 1) / fs_mhz - delay[a]
            traces[e, k0:k1 + 1] += amp[a] * np.cos(two_pi_f * td) * np.exp(-td * td * inv_two_sig2)
    return traces


# ---------------------------------------------------------------------------
# delay-and-sum backprojection
# ---------------------------------------------------------------------------

def _backproject_loops(vol, sigs, el_pos, origin, spacing, c_mmus, fs_mhz):
    """Sum linearly interpolated element samples at each voxel's delay.

    vol : (X, Y, Z) float64, overwritten; sigs : (E, T); el_pos : (E, 3).
    Out-of-window delays contribute zero.  Mean over elements.
    """
    nx, ny, nz = vol.shape
    n_el, n_t = sigs.shape
    inv_el = 1.0 / n_el
    for ix in range(nx):
        x = origin[0] + ix * spacing[0]
        for iy in range(ny):
            y = origin[1] + iy * spacing[1]
            for iz in range(nz):
                z = origin[2] + iz * spacing[2]
                acc = 0.0
                for e in range(n_el):
                    dx = x - el_pos[e, 0]
                    dy = y - el_pos[e, 1]
                    dz = z - el_pos[e, 2]
                    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
                    tau = dist / c_mmus * fs_mhz
                    i0 = int(math.floor(tau))
                    if 0 <= i0 < n_t - 1:
                        frac = tau - i0
                        acc += sigs[e, i0] * (1.0 - frac) + sigs[e, i0 + 1] * frac
                vol[ix, iy, iz] = acc * inv_el
    return vol


def _backproject_numpy(vol, sigs, el_pos, origin, spacing, c_mmus, fs_mhz):
    nx, ny, nz = vol.shape
    n_el, n_t = sigs.shape
    gx = origin[0] + spacing[0] * np.arange(nx)
    gy = origin[1] + spacing[1] * np.arange(ny)
    gz = origin[2] + spacing[2] * np.arange(nz)
    xx, yy, zz = np.meshgrid(gx, gy, gz, indexing="ij")
    acc = np.zeros_like(vol)
    for e in range(n_el):
        dist = np.sqrt((xx - el_pos[e, 0]) ** 2 + (yy - el_pos[e, 1]) ** 2 + (zz - el_pos[e, 2]) ** 2)
        tau = dist / c_mmus * fs_mhz
        i0 = np.floor(tau).astype(np.int64)
        frac = tau - i0
        valid = (i0 >= 0) & (i0 < n_t - 1)
        i0c = np.clip(i0, 0, n_t - 2)
        contrib = sigs[e, i0c] * (1.0 - frac) + sigs[e, i0c + 1] * frac
        acc += np.where(valid, contrib, 0.0)
    vol[...] = acc / n_el
    return vol


# ---------------------------------------------------------------------------
# weighted matrix-vector multiply over a block of samples
# ---------------------------------------------------------------------------

def _mvm_loops(weights, x):
    """Row-weighted MAC over time: out[r, t] = sum_i weights[r, i] * x[i, t]."""
    n_rows, m = weights.shape
    n_t = x.shape[1]
    out = np.zeros((n_rows, n_t))
    for r in range(n_rows):
        for t in range(n_t):
            acc = 0.0
            for i in range(m):
                acc += weights[r, i] * x[i, t]
            out[r, t] = acc
    return out


def _mvm_numpy(weights, x):
    return weights @ x


if USE_NUMBA:
    _forward_jit = njit(cache=True)(_forward_loops)
    _backproject_jit = njit(cache=True)(_backproject_loops)
    _mvm_jit = njit(cache=True)(_mvm_loops)
else:  # pragma: no cover
    _forward_jit = None
    _backproject_jit = None
    _mvm_jit = None


def forward_accumulate(traces, el_pos, src_pos, src_amp, c_mmus, fs_mhz,
                       f_c_mhz, sigma_us, eps_mm, atten_db_cm_mhz=0.0):
    traces = np.ascontiguousarray(traces, dtype=np.float64)
    args = (traces,
            np.ascontiguousarray(el_pos, dtype=np.float64),
            np.ascontiguousarray(src_pos, dtype=np.float64),
            np.ascontiguousarray(src_amp, dtype=np.float64),
            float(c_mmus), float(fs_mhz), float(f_c_mhz), float(sigma_us),
            float(eps_mm), float(atten_db_cm_mhz))
    if USE_NUMBA:
        return _forward_jit(*args)
    return _forward_numpy(*args)


def backproject_sum(sigs, el_pos, origin, spacing, dims, c_mmus, fs_mhz):
    vol = np.zeros(tuple(int(d) for d in dims))
    args = (vol,
            np.ascontiguousarray(sigs, dtype=np.float64),
            np.ascontiguousarray(el_pos, dtype=np.float64),
            np.asarray(origin, dtype=np.float64),
            np.asarray(spacing, dtype=np.float64),
            float(c_mmus), float(fs_mhz))
    if USE_NUMBA:
        return _backproject_jit(*args)
    return _backproject_numpy(*args)


def mvm(weights, x):
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _mvm_jit(weights, x)
    return _mvm_numpy(weights, x)
