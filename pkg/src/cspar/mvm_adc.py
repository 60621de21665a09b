"""Behavioral model of the ternary multiply-accumulate SAR ADC.

One converter computes the dot product between a ternary weight row and
the 16 analog channel voltages by passive charge redistribution: each
channel samples onto its own 64-unit slice of a 1024-unit capacitor
bank, and connecting the slices shares charge, so the top-plate voltage
is the weighted sum scaled by 64/1024 = 1/16.  The SAR loop then
digitizes that voltage.  Capacitor mismatch perturbs the effective
weights; comparator noise adds to the voltage before quantization.

``ideal_mvm`` is the exact-arithmetic oracle: same arithmetic path,
no mismatch, no quantization.  Both it and ``compress_block`` slice
multi-chip (block-diagonal) matrices into per-chip products with
identical call shapes, so decomposed and composite runs agree bit for
bit when the noise sources are off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockio import ContainerError, read_payload, write_payload
from .kernels import mvm
from .matrices import MeasurementMatrix

_NUM_ADCS = 4          # parallel MVM converters per chip
_BANK_STREAM = 11      # rng stream tags, kept distinct per noise source
_NOISE_STREAM = 29


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 10
    full_scale: float = 1.0
    channels_per_adc: int = 16
    unit_caps_per_channel: int = 64
    total_unit_caps: int = 1024
    cap_mismatch_sigma: float = 0.0
    comparator_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"bits must be >= 1, got {self.bits}")
        if self.bits > 16:
            raise ValueError(f"bits > 16 not representable in the code container, got {self.bits}")
        if self.total_unit_caps != self.channels_per_adc * self.unit_caps_per_channel:
            raise ValueError(
                f"total_unit_caps {self.total_unit_caps} != "
                f"{self.channels_per_adc} x {self.unit_caps_per_channel}")
        if self.full_scale <= 0:
            raise ValueError(f"full_scale must be positive, got {self.full_scale}")
        if self.cap_mismatch_sigma < 0 or self.comparator_noise_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")

    @property
    def lsb(self) -> float:
        return 2.0 * self.full_scale / (1 << self.bits)

    @property
    def code_min(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.bits - 1)) - 1


@dataclass(frozen=True)
class CapBank:
    """Per-channel sampling capacitance: 16 sums of 64 unit caps each."""

    channel_caps: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        caps = np.asarray(self.channel_caps, dtype=np.float64)
        if (caps <= 0).any():
            raise ValueError("capacitor bank has non-positive channel capacitance")
        caps.setflags(write=False)
        object.__setattr__(self, "channel_caps", caps)
        object.__setattr__(self, "total", float(caps.sum()))

    @classmethod
    def draw(cls, cfg: AdcConfig, row: int) -> "CapBank":
        """Mismatch draw for one converter; deterministic in (seed, row).

        Because the key is the chip-local row index, the same physical
        chip is reused when a scan presents it at different positions.
        """
        rng = np.random.default_rng([cfg.seed, _BANK_STREAM, row])
        units = rng.normal(1.0, cfg.cap_mismatch_sigma,
                           size=(cfg.channels_per_adc, cfg.unit_caps_per_channel))
        return cls(units.sum(axis=1))

    @property
    def weights(self) -> np.ndarray:
        return self.channel_caps / self.total


@dataclass(frozen=True)
class CompressedBlock:
    codes: np.ndarray
    scale: float                 # volts per LSB
    matrix_id: str
    bits: int = 10

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2:
            raise ValueError(f"codes must be 2-D, got shape {codes.shape}")
        lo, hi = -(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1
        if codes.min(initial=0) < lo or codes.max(initial=0) > hi:
            raise ValueError(f"codes outside [{lo}, {hi}] for {self.bits}-bit ADC")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        codes = codes.astype(np.int16)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n_rows(self) -> int:
        return int(self.codes.shape[0])

    @property
    def num_samples(self) -> int:
        return int(self.codes.shape[1])


def mac_sample(x, row, bank: CapBank) -> float:
    """One charge-redistribution dot product: sum_i row_i x_i (C_i / C_tot)."""
    x = np.asarray(x, dtype=np.float64)
    row = np.asarray(row, dtype=np.float64)
    return float(np.dot(row * x, bank.weights))


def quantize(v, cfg: AdcConfig, noise_draw=0.0):
    """Midrise uniform quantizer with symmetric clamping.

    code = clamp(floor((v + noise)/lsb), -2^(b-1), 2^(b-1)-1).  Scalar
    in, scalar out; arrays quantize elementwise.
    """
    u = np.floor((np.asarray(v, dtype=np.float64) + noise_draw) / cfg.lsb)
    u = np.clip(u, cfg.code_min, cfg.code_max)
    if np.isscalar(v) or np.ndim(v) == 0:
        return int(u)
    return u.astype(np.int64)


def dequantize(codes, scale: float) -> np.ndarray:
    """Reconstruction level at the centre of each midrise bin."""
    return (np.asarray(codes, dtype=np.float64) + 0.5) * scale


def _chip_layout(phi: MeasurementMatrix, channels: int):
    """Split a (possibly block-diagonal) matrix into per-chip pieces.

    Returns a list of (row_indices, col_start) with each row assigned to
    the single chip its support lies in.  Rows spanning two chips have
    no hardware realization and are rejected.
    """
    if phi.m_cols <= channels:
        return [(np.arange(phi.n_rows), 0)]
    if phi.m_cols % channels != 0:
        raise ValueError(f"{phi.m_cols} columns not a whole number of {channels}-channel chips")
    n_chips = phi.m_cols // channels
    chip_rows: list[list[int]] = [[] for _ in range(n_chips)]
    for r in range(phi.n_rows):
        cols = np.flatnonzero(phi.entries[r])
        chips = np.unique(cols // channels)
        if chips.size != 1:
            raise ValueError(f"row {r} spans chips {chips.tolist()}; one row maps to one converter")
        chip_rows[int(chips[0])].append(r)
    return [(np.asarray(rows, dtype=np.intp), c * channels)
            for c, rows in enumerate(chip_rows) if rows]


def compress_block(signals, phi: MeasurementMatrix, cfg: AdcConfig) -> CompressedBlock:
    """Hardware-path compression: Y = quantize(mac(X)) per row and sample."""
    x = np.asarray(getattr(signals, "data", signals), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != phi.m_cols:
        raise ValueError(f"signals shape {x.shape} does not feed a {phi.n_rows}x{phi.m_cols} matrix")
    layout = _chip_layout(phi, cfg.channels_per_adc)
    for rows, _ in layout:
        if rows.size > _NUM_ADCS:
            raise ValueError(f"{rows.size} rows on one chip exceeds its {_NUM_ADCS} converters")
    codes = np.empty((phi.n_rows, x.shape[1]), dtype=np.int64)
    for rows, col0 in layout:
        w = phi.entries[rows, col0:col0 + cfg.channels_per_adc].astype(np.float64)
        for local, _ in enumerate(rows):
            w[local] *= CapBank.draw(cfg, local).weights
        v = mvm(w, x[col0:col0 + cfg.channels_per_adc])
        for local, r in enumerate(rows):
            noise = _comparator_noise(cfg, local, x.shape[1])
            codes[r] = quantize(v[local], cfg, noise)
    return CompressedBlock(codes=codes, scale=cfg.lsb, matrix_id=phi.matrix_id, bits=cfg.bits)


def _comparator_noise(cfg: AdcConfig, row: int, t: int):
    if cfg.comparator_noise_sigma == 0.0:
        return 0.0
    rng = np.random.default_rng([cfg.seed, _NOISE_STREAM, row])
    return rng.normal(0.0, cfg.comparator_noise_sigma, size=t)


def ideal_mvm(signals, phi: MeasurementMatrix) -> np.ndarray:
    """Exact-arithmetic oracle: (1/16) Phi X, no quantization, no mismatch.

    Uses the same per-chip product decomposition as the hardware path,
    so the two agree to the last bit when noise sources are disabled.
    """
    x = np.asarray(getattr(signals, "data", signals), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != phi.m_cols:
        raise ValueError(f"signals shape {x.shape} does not feed a {phi.n_rows}x{phi.m_cols} matrix")
    channels = 16
    out = np.empty((phi.n_rows, x.shape[1]), dtype=np.float64)
    for rows, col0 in _chip_layout(phi, channels):
        w = phi.entries[rows, col0:col0 + channels].astype(np.float64)
        out[rows] = mvm(w, x[col0:col0 + channels])
    return out * (1.0 / channels)


def write_compressed_block(path, block: CompressedBlock, matrix_file: str = "") -> None:
    sidecar = {
        "kind": "compressed",
        "bits": block.bits,
        "scale_v_per_lsb": block.scale,
        "matrix_file": matrix_file,
        "matrix_id": block.matrix_id,
        "rows": block.n_rows,
        "cols": block.num_samples,
    }
    write_payload(path, block.codes, sidecar)


def read_compressed_block(path) -> tuple[CompressedBlock, str]:
    flat, sidecar = read_payload(path)
    for key in ("kind", "bits", "scale_v_per_lsb", "matrix_id", "rows", "cols"):
        if key not in sidecar:
            raise ContainerError(f"compressed container missing {key!r}")
    if sidecar["kind"] != "compressed":
        raise ContainerError(f"container kind {sidecar['kind']!r} is not 'compressed'")
    rows, cols = int(sidecar["rows"]), int(sidecar["cols"])
    if flat.size != rows * cols:
        raise ContainerError(f"payload has {flat.size} codes, sidecar says {rows}x{cols}")
    block = CompressedBlock(codes=flat.reshape(rows, cols),
                            scale=float(sidecar["scale_v_per_lsb"]),
                            matrix_id=sidecar["matrix_id"], bits=int(sidecar["bits"]))
    return block, sidecar.get("matrix_file", "")
