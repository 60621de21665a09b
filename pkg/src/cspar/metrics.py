"""Converter and system metrology: SNDR/ENOB, linearity sweeps, NMSE.

The spectral test assumes coherent sampling (f_in = J/K f_s with J odd
and K a power of two) so every spectral component lands exactly on an
FFT bin and no window is needed.  The linearity experiments drive all
16 channels with one sine and read back the compressed output's
fundamental through an in-phase demodulator; demodulating against the
known drive phase keeps the estimate signed, which matters because the
weight sweep crosses zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .afe import AfeConfig, apply_afe
from .kernels import mvm
from .mvm_adc import AdcConfig, CapBank, dequantize, quantize

_DEFAULT_RATE_MHZ = 20.41
_DEFAULT_TONE_MHZ = 3.5


@dataclass(frozen=True)
class SpectralMetrics:
    sndr_db: float
    snr_db: float
    enob: float


@dataclass(frozen=True)
class LinearitySweepResult:
    axis: np.ndarray          # swept quantity (weight sum, or input Vpp)
    mean_outputs: np.ndarray  # demodulated output per axis point, volts
    slope: float
    intercept: float
    r_squared: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64))
        object.__setattr__(self, "mean_outputs", np.asarray(self.mean_outputs, dtype=np.float64))


def sndr_sine(codes, f_in: float, f_s: float) -> SpectralMetrics:
    """Windowless coherent FFT metrics of a quantized sine record.

    SNDR counts everything except DC and the fundamental as error; SNR
    additionally excludes the first five harmonics (folded).  ENOB is
    (SNDR - 1.76)/6.02.
    """
    codes = np.asarray(codes, dtype=np.float64).ravel()
    k = codes.size
    if k < 4096 or (k & (k - 1)) != 0:
        raise ValueError(f"record length must be a power of two >= 4096, got {k}")
    j_real = f_in / f_s * k
    j = int(round(j_real))
    if abs(j_real - j) > 1e-6 or j % 2 == 0 or not (0 < j < k // 2):
        raise ValueError(
            f"need coherent sampling f_in/f_s = J/K with J odd (got J = {j_real:.6f}); "
            f"pick f_in = J*f_s/{k}")
    power = np.abs(np.fft.fft(codes)) ** 2
    fund = power[j] + power[k - j]
    total = float(power.sum())
    noise_and_dist = total - power[0] - fund
    harm_bins = set()
    for h in range(2, 7):
        b = (h * j) % k
        harm_bins.update({b, (k - b) % k})
    harm_bins -= {0, j, k - j}
    harm_power = float(sum(power[b] for b in harm_bins))
    noise_only = noise_and_dist - harm_power
    sndr = 10.0 * math.log10(fund / noise_and_dist) if noise_and_dist > 0 else math.inf
    snr = 10.0 * math.log10(fund / noise_only) if noise_only > 0 else math.inf
    return SpectralMetrics(sndr_db=sndr, snr_db=snr, enob=(sndr - 1.76) / 6.02)


def nmse(a, b) -> float:
    """Normalized mean squared error ||a - b||^2 / ||b||^2; b is the reference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    ref = float(np.sum(b * b))
    if ref == 0.0:
        raise ValueError("reference block is identically zero; NMSE undefined")
    return float(np.sum((a - b) ** 2)) / ref


def _fit_line(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return float(slope), float(intercept), r2


def _weight_vectors_with_sum(s: int, count: int, rng, channels: int = 16):
    """Up to ``count`` distinct ternary vectors with the given entry sum."""
    feasible = list(range(abs(s), channels + 1, 2))
    seen = {}
    attempts = 0
    while len(seen) < count and attempts < 40 * count:
        attempts += 1
        nonzero = int(rng.choice(feasible)) if feasible else 0
        if nonzero == 0:
            w = tuple([0] * channels)
        else:
            pos = (nonzero + s) // 2
            order = rng.permutation(channels)
            w = np.zeros(channels, dtype=np.int8)
            w[order[:pos]] = 1
            w[order[pos:nonzero]] = -1
            w = tuple(int(v) for v in w)
        seen.setdefault(w, None)
    return [np.array(w, dtype=np.float64) for w in seen]


def _drive_block(amplitude_vpp: float, j: int, k: int, rate: float,
                 afe_cfg: AfeConfig, channels: int = 16):
    t = np.arange(k)
    sine = 0.5 * amplitude_vpp * np.sin(2.0 * np.pi * j * t / k)
    block = np.tile(sine, (channels, 1))
    out = apply_afe(block, afe_cfg, _Rate(rate))
    phase_ref = np.sin(2.0 * np.pi * j * t / k)
    return out, phase_ref


class _Rate:
    def __init__(self, sample_rate):
        self.sample_rate = sample_rate


def _demod(volts: np.ndarray, phase_ref: np.ndarray) -> float:
    return float(2.0 / volts.size * np.dot(volts, phase_ref))


def _tone_bin(samples: int, rate: float, tone: float) -> int:
    j = int(round(tone / rate * samples))
    return j if j % 2 == 1 else j - 1


def linearity_weight_sweep(amplitudes, cfg: AdcConfig, combos_per_sum: int = 50,
                           seed: int = 0, afe_cfg: AfeConfig | None = None,
                           sample_rate: float = _DEFAULT_RATE_MHZ,
                           samples: int = 1024) -> list[LinearitySweepResult]:
    """Output vs weight sum, one result per drive amplitude (Vpp at AFE input).

    For every weight sum in [-16, 16] up to ``combos_per_sum`` distinct
    ternary vectors are drawn, each converted through the MAC + ADC, and
    the demodulated outputs averaged.  A straight line is then fitted
    across the 33 sums.
    """
    if combos_per_sum < 1:
        raise ValueError("combos_per_sum must be >= 1")
    if afe_cfg is None:
        afe_cfg = AfeConfig(lpf_cutoff=10.0)
    channels = cfg.channels_per_adc
    j = _tone_bin(samples, sample_rate, _DEFAULT_TONE_MHZ)
    sums = np.arange(-channels, channels + 1)
    results = []
    for ai, amp in enumerate(amplitudes):
        # fresh front-end noise per sweep point, as separate captures would see
        point_cfg = replace(afe_cfg, noise_seed=afe_cfg.noise_seed + 7919 * ai)
        drive, phase_ref = _drive_block(amp, j, samples, sample_rate, point_cfg, channels)
        means = np.empty(sums.size)
        for si, s in enumerate(sums):
            rng = np.random.default_rng([seed, 101, int(s) + channels])
            outs = []
            for ci, w in enumerate(_weight_vectors_with_sum(int(s), combos_per_sum, rng, channels)):
                bank = CapBank.draw(cfg, ci % 4)
                v = mvm((w * bank.weights)[None, :], drive)[0]
                noise = rng.normal(0.0, cfg.comparator_noise_sigma, samples) \
                    if cfg.comparator_noise_sigma > 0 else 0.0
                volts = dequantize(quantize(v, cfg, noise), cfg.lsb)
                outs.append(_demod(volts, phase_ref))
            means[si] = np.mean(outs)
        slope, intercept, r2 = _fit_line(sums.astype(float), means)
        results.append(LinearitySweepResult(axis=sums.astype(float), mean_outputs=means,
                                            slope=slope, intercept=intercept, r_squared=r2,
                                            label=f"{amp:g} Vpp"))
    return results


def linearity_input_sweep(sums=None, amplitudes=(0.001, 0.002, 0.004, 0.008),
                          cfg: AdcConfig = AdcConfig(), seed: int = 0,
                          afe_cfg: AfeConfig | None = None,
                          sample_rate: float = _DEFAULT_RATE_MHZ,
                          samples: int = 1024) -> list[LinearitySweepResult]:
    """Output vs input amplitude at fixed weight sum, one result per sum.

    The zero weight sum is excluded: its output does not depend on the
    input, so the fit's R^2 is undefined.
    """
    channels = cfg.channels_per_adc
    if sums is None:
        sums = [s for s in range(-channels, channels + 1) if s != 0]
    sums = [int(s) for s in sums]
    if any(s == 0 for s in sums):
        raise ValueError("weight sum 0 has no input dependence; R^2 undefined, exclude it")
    amplitudes = np.asarray(list(amplitudes), dtype=np.float64)
    if amplitudes.size < 3:
        raise ValueError(f"need at least 3 amplitude points, got {amplitudes.size}")
    if afe_cfg is None:
        afe_cfg = AfeConfig(lpf_cutoff=10.0)
    j = _tone_bin(samples, sample_rate, _DEFAULT_TONE_MHZ)
    drives = [
        _drive_block(a, j, samples, sample_rate,
                     replace(afe_cfg, noise_seed=afe_cfg.noise_seed + 7919 * ai), channels)
        for ai, a in enumerate(amplitudes)
    ]
    results = []
    for s in sums:
        rng = np.random.default_rng([seed, 202, s + channels])
        w = _weight_vectors_with_sum(s, 1, rng, channels)[0]
        bank = CapBank.draw(cfg, abs(s) % 4)
        outs = np.empty(amplitudes.size)
        for ai, (drive, phase_ref) in enumerate(drives):
            v = mvm((w * bank.weights)[None, :], drive)[0]
            noise = rng.normal(0.0, cfg.comparator_noise_sigma, samples) \
                if cfg.comparator_noise_sigma > 0 else 0.0
            volts = dequantize(quantize(v, cfg, noise), cfg.lsb)
            outs[ai] = _demod(volts, phase_ref)
        slope, intercept, r2 = _fit_line(amplitudes, outs)
        results.append(LinearitySweepResult(axis=amplitudes, mean_outputs=outs,
                                            slope=slope, intercept=intercept,
                                            r_squared=r2, label=f"sum {s:+d}"))
    return results


def comparator_sigma_for_sndr(target_sndr_db: float, cfg: AdcConfig,
                              amplitude: float | None = None) -> float:
    """Comparator noise sigma that lands a full-scale sine at the target SNDR.

    Solves A^2/2 / (sigma^2 + lsb^2/12) = 10^(SNDR/10) for sigma; raises
    if quantization noise alone already exceeds the target budget.
    """
    a = cfg.full_scale - cfg.lsb / 2 if amplitude is None else amplitude
    budget = (a * a / 2.0) / (10.0 ** (target_sndr_db / 10.0))
    quant = cfg.lsb ** 2 / 12.0
    if budget <= quant:
        raise ValueError(
            f"target {target_sndr_db} dB needs total noise {budget:.3e} V^2 but "
            f"quantization alone contributes {quant:.3e} V^2")
    return math.sqrt(budget - quant)
