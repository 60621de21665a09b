"""3D image formation by delay-and-sum backprojection, plus image metrics.

Signal blocks from one or more scan positions are band-pass filtered,
optionally augmented with the first-derivative term of universal
backprojection, and summed into a voxel grid along spherical
time-of-flight shells.  Quality is scored with a Gaussian-windowed 3D
SSIM; maximum-intensity projections give the three standard views.
Lengths are mm, times us, frequencies MHz throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from scipy.signal import butter, hilbert, sosfiltfilt

from .blockio import write_payload, read_payload, write_pgm16, ContainerError
from .kernels import backproject_sum
from .phantom import AcousticConfig, ScanSchedule, TransducerArray

__all__ = [
    "ImageVolume",
    "Projection",
    "backproject",
    "bandpass_filter",
    "depth_envelope",
    "max_intensity_projections",
    "read_volume",
    "ssim3d",
    "write_projections",
    "write_volume",
]

DEFAULT_BAND_MHZ = (1.75, 5.25)


@dataclass(frozen=True)
class ImageVolume:
    """X x Y x Z voxel grid with physical placement metadata."""

    voxels: np.ndarray
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    spacing: tuple[float, float, float] = (1.0, 1.0, 0.5)

    def __post_init__(self):
        vox = np.asarray(self.voxels, dtype=np.float64)
        if vox.ndim != 3:
            raise ValueError(f"voxels must be 3-D (X, Y, Z), got shape {vox.shape}")
        if not np.all(np.isfinite(vox)):
            raise ValueError("voxel values must all be finite")
        origin = tuple(float(v) for v in self.origin)
        spacing = tuple(float(v) for v in self.spacing)
        if len(origin) != 3 or len(spacing) != 3:
            raise ValueError("origin and spacing must have three components")
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive in every axis, got {spacing}")
        vox.setflags(write=False)
        object.__setattr__(self, "voxels", vox)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.voxels.shape

    def axis_extent_mm(self, axis: int) -> tuple[float, float]:
        """Physical coordinates of the first and last voxel centre on an axis."""
        n = self.voxels.shape[axis]
        lo = self.origin[axis]
        return lo, lo + (n - 1) * self.spacing[axis]


@dataclass(frozen=True)
class Projection:
    """2D maximum-intensity view with axis names and mm extents."""

    image: np.ndarray
    axes: tuple[str, str]
    extent_mm: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        img.setflags(write=False)
        object.__setattr__(self, "image", img)


def _block_channels(block) -> np.ndarray:
    """Channel-by-time data from a reconstruction, a signal block, or an array."""
    arr = getattr(block, "estimates", None)
    if arr is None:
        arr = getattr(block, "data", block)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"signal block must be 2-D (channels x time), got shape {arr.shape}")
    return arr


def bandpass_filter(signals: np.ndarray, sample_rate_mhz: float,
                    band_mhz: tuple[float, float] = DEFAULT_BAND_MHZ) -> np.ndarray:
    """Zero-phase 4th-order Butterworth band-pass along the time axis."""
    lo, hi = float(band_mhz[0]), float(band_mhz[1])
    nyq = sample_rate_mhz / 2.0
    if not (0.0 < lo < hi < nyq):
        raise ValueError(
            f"band ({lo}, {hi}) MHz must satisfy 0 < low < high < Nyquist ({nyq:.2f} MHz)")
    sos = butter(4, (lo, hi), btype="bandpass", fs=sample_rate_mhz, output="sos")
    return sosfiltfilt(sos, np.asarray(signals, dtype=np.float64), axis=-1)


def _derivative_term(signals: np.ndarray, sample_rate_mhz: float) -> np.ndarray:
    """First-difference stand-in for the 2p - 2t dp/dt backprojection term."""
    dt = 1.0 / sample_rate_mhz
    t = np.arange(signals.shape[-1]) * dt
    dpdt = np.gradient(signals, dt, axis=-1)
    return 2.0 * signals - 2.0 * t * dpdt


def _stacked_geometry(array: TransducerArray,
                      schedule: ScanSchedule | None) -> np.ndarray:
    offsets = schedule.offsets if schedule is not None else ((0.0, 0.0),)
    stacks = []
    for dx, dy in offsets:
        el = array.element_positions.copy()
        el[:, 0] += dx
        el[:, 1] += dy
        stacks.append(el)
    return np.vstack(stacks)


def _check_reach(el_pos: np.ndarray, origin, spacing, dims,
                 c_mmus: float, fs_mhz: float, n_samples: int) -> None:
    """Every voxel must lie within the record length of its nearest element."""
    gx = origin[0] + spacing[0] * np.arange(dims[0])
    gy = origin[1] + spacing[1] * np.arange(dims[1])
    gz = origin[2] + spacing[2] * np.arange(dims[2])
    xx, yy, zz = np.meshgrid(gx, gy, gz, indexing="ij")
    nearest = np.full(xx.shape, np.inf)
    for e in range(el_pos.shape[0]):
        d = np.sqrt((xx - el_pos[e, 0]) ** 2 + (yy - el_pos[e, 1]) ** 2
                    + (zz - el_pos[e, 2]) ** 2)
        np.minimum(nearest, d, out=nearest)
    worst = float(np.max(nearest))
    reach = c_mmus * (n_samples - 1) / fs_mhz
    if worst > reach:
        raise ValueError(
            f"voxel grid reaches {worst:.2f} mm from the nearest element, but "
            f"{n_samples} samples at {fs_mhz} MHz cover only {reach:.2f} mm")


def backproject(blocks, array: TransducerArray, cfg: AcousticConfig,
                origin, dims, spacing: tuple[float, float, float] = (1.0, 1.0, 0.5),
                schedule: ScanSchedule | None = None,
                band_mhz: tuple[float, float] | None = DEFAULT_BAND_MHZ,
                derivative_term: bool = False) -> ImageVolume:
    """Delay-and-sum image of one or more channel blocks onto a voxel grid.

    ``blocks`` is either a sequence with one block per schedule offset or
    a single block whose rows stack all virtual elements position-major.
    The band-pass runs first (pass ``band_mhz=None`` to skip); voxel
    values average linearly interpolated element samples at each voxel's
    one-way delay.
    """
    offsets = schedule.offsets if schedule is not None else ((0.0, 0.0),)
    n_pos = len(offsets)
    if isinstance(blocks, (list, tuple)):
        if len(blocks) != n_pos:
            raise ValueError(f"got {len(blocks)} blocks for {n_pos} scan positions")
        parts = [_block_channels(b) for b in blocks]
        widths = {p.shape[1] for p in parts}
        if len(widths) != 1:
            raise ValueError(f"blocks disagree on record length: {sorted(widths)}")
        for p in parts:
            if p.shape[0] != array.num_elements:
                raise ValueError(
                    f"block has {p.shape[0]} channels, array has {array.num_elements} elements")
        sigs = np.vstack(parts)
    else:
        sigs = _block_channels(blocks)
        if sigs.shape[0] != array.num_elements * n_pos:
            raise ValueError(
                f"stacked block has {sigs.shape[0]} channels; "
                f"{n_pos} positions x {array.num_elements} elements "
                f"= {array.num_elements * n_pos} expected")
    el_pos = _stacked_geometry(array, schedule)
    dims = tuple(int(d) for d in dims)
    origin = tuple(float(v) for v in origin)
    spacing = tuple(float(v) for v in spacing)
    c = cfg.sound_speed_mm_us
    fs = cfg.sample_rate
    _check_reach(el_pos, origin, spacing, dims, c, fs, sigs.shape[1])
    if band_mhz is not None:
        sigs = bandpass_filter(sigs, fs, band_mhz)
    if derivative_term:
        sigs = _derivative_term(sigs, fs)
    vox = backproject_sum(sigs, el_pos, origin, spacing, dims, c, fs)
    return ImageVolume(vox, origin=origin, spacing=spacing)


# ---------------------------------------------------------------------------
# image-domain metrics
# ---------------------------------------------------------------------------

def _volume_data(v) -> np.ndarray:
    arr = np.asarray(getattr(v, "voxels", v), dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-D volume, got shape {arr.shape}")
    return arr


def _gaussian_blur(vol: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = vol
    for axis in range(3):
        out = correlate1d(out, kernel, axis=axis, mode="reflect")
    return out


def ssim3d(a, b, window: int = 7, dynamic_range: float | None = None) -> float:
    """Gaussian-windowed structural similarity averaged over the volume.

    The window is a separable Gaussian (sigma 1.5 voxels) of odd width;
    stabilizing constants are C1 = (0.01 L)^2 and C2 = (0.03 L)^2 with L
    the joint dynamic range (1 when both volumes are constant-equal).
    Identical volumes score exactly 1.
    """
    va = _volume_data(a)
    vb = _volume_data(b)
    if va.shape != vb.shape:
        raise ValueError(f"volume shapes differ: {va.shape} vs {vb.shape}")
    sa = getattr(a, "spacing", None)
    sb = getattr(b, "spacing", None)
    if sa is not None and sb is not None and tuple(sa) != tuple(sb):
        raise ValueError(f"volume spacings differ: {sa} vs {sb}")
    window = int(window)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if dynamic_range is None:
        hi = max(float(va.max()), float(vb.max()))
        lo = min(float(va.min()), float(vb.min()))
        dynamic_range = hi - lo
    if dynamic_range <= 0.0:
        dynamic_range = 1.0
    idx = np.arange(window) - (window - 1) / 2.0
    kernel = np.exp(-0.5 * (idx / 1.5) ** 2)
    kernel /= kernel.sum()
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu_a = _gaussian_blur(va, kernel)
    mu_b = _gaussian_blur(vb, kernel)
    var_a = _gaussian_blur(va * va, kernel) - mu_a * mu_a
    var_b = _gaussian_blur(vb * vb, kernel) - mu_b * mu_b
    cov = _gaussian_blur(va * vb, kernel) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def depth_envelope(vol: ImageVolume) -> ImageVolume:
    """Magnitude of the analytic signal along the depth axis, for display."""
    env = np.abs(hilbert(vol.voxels, axis=2))
    return ImageVolume(env, origin=vol.origin, spacing=vol.spacing)


def max_intensity_projections(vol: ImageVolume) -> dict[str, Projection]:
    """Per-axis maximum projections keyed ``xy``, ``xz``, ``yz``."""
    ext = [vol.axis_extent_mm(i) for i in range(3)]
    return {
        "xy": Projection(vol.voxels.max(axis=2), ("x", "y"), (ext[0], ext[1])),
        "xz": Projection(vol.voxels.max(axis=1), ("x", "z"), (ext[0], ext[2])),
        "yz": Projection(vol.voxels.max(axis=0), ("y", "z"), (ext[1], ext[2])),
    }


# ---------------------------------------------------------------------------
# container round trips
# ---------------------------------------------------------------------------

def write_volume(path, vol: ImageVolume):
    """Binary voxels plus a JSON sidecar describing the grid placement."""
    meta = {
        "kind": "volume",
        "dims": list(vol.dims),
        "spacing_mm": list(vol.spacing),
        "origin_mm": list(vol.origin),
    }
    return write_payload(path, vol.voxels, meta)


def read_volume(path) -> ImageVolume:
    flat, meta = read_payload(path)
    if meta.get("kind") != "volume":
        raise ContainerError(f"{path}: sidecar kind is {meta.get('kind')!r}, expected 'volume'")
    dims = tuple(int(d) for d in meta.get("dims", ()))
    if len(dims) != 3:
        raise ContainerError(f"{path}: sidecar dims must have three entries")
    if flat.size != dims[0] * dims[1] * dims[2]:
        raise ContainerError(
            f"{path}: payload has {flat.size} voxels, sidecar says {dims}")
    return ImageVolume(flat.reshape(dims),
                       origin=tuple(meta.get("origin_mm", (0.0, 0.0, 0.0))),
                       spacing=tuple(meta.get("spacing_mm", (1.0, 1.0, 0.5))))


def write_projections(stem, vol: ImageVolume) -> list:
    """Three 16-bit PGM views next to ``stem`` with mm extents in sidecars."""
    from pathlib import Path

    stem = Path(stem)
    written = []
    for name, proj in max_intensity_projections(vol).items():
        meta = {
            "kind": "projection",
            "view": name,
            "axes": list(proj.axes),
            "extent_mm": [list(proj.extent_mm[0]), list(proj.extent_mm[1])],
        }
        written.append(write_pgm16(stem.with_name(stem.name + f"_{name}.pgm"),
                                   proj.image, meta))
    return written
