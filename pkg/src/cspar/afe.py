"""Analog front end: amplification, input-referred noise, anti-alias pole.

Per channel the chain is gain -> single-pole low-pass -> hard clip.
Noise is injected at the input as white Gaussian with the configured
density integrated over the simulation bandwidth, so the amplified
output matches what a spectrum analyzer would report at the AFE output.
The low-pass is a bilinear-transform discretization of 1/(1 + s/wc)
with the cutoff prewarped, which places the -3 dB point exactly at
``lpf_cutoff`` and therefore requires the cutoff to sit below Nyquist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .blockio import SignalBlock

_PGA_SETTINGS = (8, 16, 32, 64)
_MAX_TOTAL_DB = 41.7     # chain gain at the 3.5 MHz band centre, max PGA
_CENTER_MHZ = 3.5
_NOISE_STREAM = 17


def lpf_magnitude(f, cutoff: float):
    """Analytic single-pole magnitude 1/sqrt(1 + (f/fc)^2); f, fc in MHz."""
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    f = np.asarray(f, dtype=np.float64)
    out = 1.0 / np.sqrt(1.0 + (f / cutoff) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AfeConfig:
    pga_gain: int = 64
    lpf_extra_gain: float = 2.0
    lna_gain: float | None = None       # derived from the 41.7 dB chain target when None
    lpf_cutoff: float = 10.35           # MHz
    input_noise_density: float = 3.5    # nV/sqrt(Hz), input-referred
    noise_seed: int = 0
    full_scale: float = 1.0             # normalized differential clip level

    def __post_init__(self):
        if self.pga_gain not in _PGA_SETTINGS:
            raise ValueError(f"pga_gain must be one of {_PGA_SETTINGS}, got {self.pga_gain}")
        if self.lpf_cutoff <= 0:
            raise ValueError(f"lpf_cutoff must be positive, got {self.lpf_cutoff}")
        if self.input_noise_density < 0:
            raise ValueError("input_noise_density must be non-negative")
        if self.full_scale <= 0:
            raise ValueError("full_scale must be positive")
        if self.lna_gain is None:
            target = 10.0 ** (_MAX_TOTAL_DB / 20.0)
            derived = target / (max(_PGA_SETTINGS) * self.lpf_extra_gain
                                * lpf_magnitude(_CENTER_MHZ, self.lpf_cutoff))
            object.__setattr__(self, "lna_gain", derived)
        elif self.lna_gain <= 0:
            raise ValueError("lna_gain must be positive")

    @property
    def total_gain(self) -> float:
        """Frequency-flat part of the chain gain (excludes LPF rolloff)."""
        return self.lna_gain * self.pga_gain * self.lpf_extra_gain


def _pole_coeffs(cutoff: float, fs: float):
    if not cutoff < fs / 2:
        raise ValueError(f"lpf_cutoff {cutoff} MHz must be below Nyquist {fs / 2} MHz")
    k = math.tan(math.pi * cutoff / fs)
    b0 = k / (1.0 + k)
    a1 = (1.0 - k) / (1.0 + k)
    return [b0, b0], [1.0, -a1]


def apply_afe(raw, cfg: AfeConfig, cfg_ac):
    """Amplify, noise, low-pass, and clip a channels-by-time block.

    ``cfg_ac`` supplies the simulation sample rate; a SignalBlock input
    must carry the same rate in its metadata.  Returns the same kind of
    object it was given (array in, array out).
    """
    fs = float(getattr(cfg_ac, "sample_rate", 0.0) or 0.0)
    if fs <= 0:
        raise ValueError("cfg_ac must carry a positive sample_rate (MHz)")
    is_block = isinstance(raw, SignalBlock)
    if is_block and abs(raw.sample_rate_mhz - fs) > 1e-9:
        raise ValueError(f"signal block sampled at {raw.sample_rate_mhz} MHz "
                         f"but the configuration says {fs} MHz")
    x = np.asarray(raw.data if is_block else raw, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"raw block must be channels x time, got shape {x.shape}")
    b, a = _pole_coeffs(cfg.lpf_cutoff, fs)
    sigma = cfg.input_noise_density * 1e-9 * math.sqrt(fs * 1e6 / 2.0)
    out = np.empty_like(x)
    for ch in range(x.shape[0]):
        drive = x[ch]
        if sigma > 0:
            rng = np.random.default_rng([cfg.noise_seed, _NOISE_STREAM, ch])
            drive = drive + rng.normal(0.0, sigma, size=x.shape[1])
        out[ch] = lfilter(b, a, cfg.total_gain * drive)
    np.clip(out, -cfg.full_scale, cfg.full_scale, out=out)
    if is_block:
        return SignalBlock(out, sample_rate_mhz=fs, kind="afe", extra=dict(raw.extra))
    return out
