"""Synthetic phantoms, transducer geometry, and the acoustic forward model.

Sources are point absorbers; each one contributes a spherically
spreading Gaussian-modulated cosine burst whose envelope bandwidth
follows the transducer's fractional bandwidth.  Units are mm for
length, us for time, MHz for frequency; sound speed converts from the
conventional m/s at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockio import SignalBlock
from .kernels import forward_accumulate

_EPS_MM = 0.1      # distance floor so on-element sources stay finite


@dataclass(frozen=True)
class TransducerArray:
    rows: int = 4
    cols: int = 4
    pitch: float = 1.0                 # mm
    center_frequency: float = 3.5      # MHz
    fractional_bandwidth: float = 1.0
    element_positions: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and column")
        if self.pitch <= 0:
            raise ValueError(f"pitch must be positive, got {self.pitch}")
        if not (0.0 < self.fractional_bandwidth <= 2.0):
            raise ValueError(f"fractional_bandwidth must be in (0, 2], got {self.fractional_bandwidth}")
        if self.center_frequency <= 0:
            raise ValueError("center_frequency must be positive")
        yy, xx = np.meshgrid(np.arange(self.rows), np.arange(self.cols), indexing="ij")
        pos = np.zeros((self.rows * self.cols, 3))
        pos[:, 0] = xx.ravel() * self.pitch
        pos[:, 1] = yy.ravel() * self.pitch
        pos.setflags(write=False)
        object.__setattr__(self, "element_positions", pos)

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols

    @property
    def extent(self) -> tuple[float, float]:
        """Tile footprint (x, y) in mm; scan offsets step by whole tiles."""
        return self.cols * self.pitch, self.rows * self.pitch


@dataclass(frozen=True)
class PointAbsorber:
    position: tuple[float, float, float]
    amplitude: float = 1.0

    def __post_init__(self):
        if len(self.position) != 3:
            raise ValueError("position must be (x, y, z)")
        if self.position[2] <= 0:
            raise ValueError(f"absorber must sit above the array plane, z={self.position[2]}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class Phantom:
    absorbers: tuple[PointAbsorber, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "absorbers", tuple(self.absorbers))

    def positions(self) -> np.ndarray:
        if not self.absorbers:
            return np.zeros((0, 3))
        return np.array([a.position for a in self.absorbers])

    def amplitudes(self) -> np.ndarray:
        return np.array([a.amplitude for a in self.absorbers])


@dataclass(frozen=True)
class AcousticConfig:
    sound_speed: float = 1500.0        # m/s
    sample_rate: float = 20.41         # MHz
    num_samples: int = 1024
    pulse_width_sigma: float | None = None   # us; derived from bandwidth when None
    seed: int = 0

    def __post_init__(self):
        if self.sound_speed <= 0 or self.sample_rate <= 0 or self.num_samples < 1:
            raise ValueError("sound_speed, sample_rate and num_samples must be positive")

    @property
    def sound_speed_mm_us(self) -> float:
        return self.sound_speed / 1000.0

    def sigma_us(self, array: TransducerArray) -> float:
        """Envelope sigma whose -6 dB spectral width is the passband width."""
        if self.pulse_width_sigma is not None:
            return self.pulse_width_sigma
        bandwidth = array.center_frequency * array.fractional_bandwidth
        return math.sqrt(2.0 * math.log(2.0)) / (math.pi * bandwidth)


@dataclass(frozen=True)
class ScanSchedule:
    offsets: tuple[tuple[float, float], ...]
    ordering: str = "row-major"

    def __post_init__(self):
        object.__setattr__(self, "offsets",
                           tuple((float(x), float(y)) for x, y in self.offsets))
        if not self.offsets:
            raise ValueError("schedule needs at least one offset")

    def validate_against(self, array: TransducerArray) -> None:
        ex, ey = array.extent
        for dx, dy in self.offsets:
            if abs(dx / ex - round(dx / ex)) > 1e-9 or abs(dy / ey - round(dy / ey)) > 1e-9:
                raise ValueError(
                    f"offset ({dx}, {dy}) is not a whole multiple of the array extent "
                    f"({ex}, {ey}); emulated tiles would overlap")


def grid_schedule(array: TransducerArray, nx: int, ny: int) -> ScanSchedule:
    """Row-major rectangular tiling: ny rows of nx non-overlapping positions."""
    ex, ey = array.extent
    offsets = [(i * ex, j * ey) for j in range(ny) for i in range(nx)]
    return ScanSchedule(offsets=tuple(offsets))


def generate_hair_phantom(seed: int) -> Phantom:
    """Five thin line targets at distinct depths, jittered per seed.

    Each hair runs along x across the (narrow) scan footprint; depths
    and lateral positions vary a little between seeds so repeated runs
    are distinguishable while the topology stays fixed.
    """
    rng = np.random.default_rng(seed)
    base_y = np.array([2.0, 7.0, 12.0, 17.0, 22.0])
    base_z = np.array([6.0, 9.0, 12.0, 7.5, 10.5])
    xs = np.arange(-0.5, 3.51, 0.2)
    absorbers = []
    for h in range(5):
        y = base_y[h] + rng.uniform(-0.5, 0.5)
        z = base_z[h] + rng.uniform(-0.5, 0.5)
        for x in xs:
            absorbers.append(PointAbsorber((x, y, z), 1.0))
    return Phantom(tuple(absorbers), name=f"hair5-seed{seed}")


def generate_ishape_phantom() -> Phantom:
    """Capital-I silhouette: two horizontal bars joined by a vertical bar.

    Lives in the z = 8 mm plane, mirror-symmetric about x = 15.5 (the
    centre of an 8-tile-wide scan footprint).  Uniform unit amplitude.
    """
    z = 8.0
    step = 0.5
    absorbers = []
    bar_x = np.arange(6.0, 25.0 + 1e-9, step)         # symmetric about 15.5
    for y in (2.0, 2.5, 3.0):
        for x in bar_x:
            absorbers.append(PointAbsorber((x, y, z), 1.0))
    for y in (12.0, 12.5, 13.0):
        for x in bar_x:
            absorbers.append(PointAbsorber((x, y, z), 1.0))
    stem_y = np.arange(3.5, 11.5 + 1e-9, step)
    for y in stem_y:
        for x in (15.0, 15.5, 16.0):
            absorbers.append(PointAbsorber((x, y, z), 1.0))
    return Phantom(tuple(absorbers), name="ishape")


def _check_config(phantom: Phantom, array: TransducerArray, cfg: AcousticConfig) -> None:
    passband_top = array.center_frequency * (1.0 + array.fractional_bandwidth / 2.0)
    if not cfg.sample_rate > 2.0 * passband_top:
        raise ValueError(
            f"sample_rate {cfg.sample_rate} MHz under-samples the transducer passband "
            f"(needs > {2.0 * passband_top:.2f} MHz)")
    if phantom.absorbers:
        depth = max(a.position[2] for a in phantom.absorbers)
        reach = cfg.num_samples * cfg.sound_speed_mm_us / cfg.sample_rate
        if reach < depth:
            raise ValueError(
                f"{cfg.num_samples} samples reach only {reach:.1f} mm; "
                f"deepest absorber sits at {depth:.1f} mm")


def forward_simulate(phantom: Phantom, array: TransducerArray, cfg: AcousticConfig,
                     element_shift: tuple[float, float] = (0.0, 0.0),
                     attenuation_db_cm_mhz: float = 0.0) -> SignalBlock:
    """Superpose per-absorber bursts into an M x T channel block."""
    _check_config(phantom, array, cfg)
    el = array.element_positions.copy()
    el[:, 0] += element_shift[0]
    el[:, 1] += element_shift[1]
    traces = np.zeros((array.num_elements, cfg.num_samples))
    if phantom.absorbers:
        traces = forward_accumulate(
            traces, el, phantom.positions(), phantom.amplitudes(),
            cfg.sound_speed_mm_us, cfg.sample_rate, array.center_frequency,
            cfg.sigma_us(array), _EPS_MM, attenuation_db_cm_mhz)
    return SignalBlock(traces, sample_rate_mhz=cfg.sample_rate, kind="raw",
                       extra={"phantom": phantom.name,
                              "offset_mm": [element_shift[0], element_shift[1]]})


def emulate_scan(phantom: Phantom, array: TransducerArray, cfg: AcousticConfig,
                 schedule: ScanSchedule,
                 attenuation_db_cm_mhz: float = 0.0) -> list[SignalBlock]:
    """One forward block per schedule offset, row-major order."""
    schedule.validate_against(array)
    return [forward_simulate(phantom, array, cfg, element_shift=off,
                             attenuation_db_cm_mhz=attenuation_db_cm_mhz)
            for off in schedule.offsets]
