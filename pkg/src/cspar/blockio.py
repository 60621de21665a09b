"""On-disk containers: binary payload + JSON sidecar pairs.

Every artifact is a pair ``<stem>.bin`` / ``<stem>.json``.  The binary
file holds the row-major little-endian payload; the sidecar carries
shape and interpretation metadata under a ``kind`` tag.  Sidecars are
written with sorted keys and a fixed layout so identical data produces
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_DTYPES = {
    "float64": "<f8",
    "int16": "<i2",
}


class ContainerError(ValueError):
    """Raised for malformed or inconsistent container files."""


def _stem(path) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n").encode("ascii")


def write_payload(path, array: np.ndarray, sidecar: dict) -> Path:
    """Write ``<stem>.bin`` + ``<stem>.json``; returns the sidecar path."""
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    if array.dtype == np.float64:
        dtype = "float64"
    elif array.dtype == np.int16:
        dtype = "int16"
    else:
        raise ContainerError(f"unsupported payload dtype {array.dtype}")
    meta = dict(sidecar)
    meta["dtype"] = dtype
    stem.with_suffix(".bin").write_bytes(np.ascontiguousarray(array).astype(_DTYPES[dtype]).tobytes())
    stem.with_suffix(".json").write_bytes(canonical_json_bytes(meta))
    return stem.with_suffix(".json")


def read_payload(path) -> tuple[np.ndarray, dict]:
    stem = _stem(path)
    json_path = stem.with_suffix(".json")
    bin_path = stem.with_suffix(".bin")
    if not json_path.exists():
        raise ContainerError(f"missing sidecar {json_path}")
    if not bin_path.exists():
        raise ContainerError(f"missing payload {bin_path}")
    meta = json.loads(json_path.read_text())
    dtype = meta.get("dtype", "float64")
    if dtype not in _DTYPES:
        raise ContainerError(f"{json_path}: unknown dtype {dtype!r}")
    flat = np.frombuffer(bin_path.read_bytes(), dtype=_DTYPES[dtype])
    return flat, meta


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# signal blocks (raw / afe / reconstructed share one container)
# ---------------------------------------------------------------------------

@dataclass
class SignalBlock:
    """M x T block of per-channel samples with acquisition metadata."""

    data: np.ndarray
    sample_rate_mhz: float
    kind: str = "raw"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def write_signal_block(path, block: SignalBlock) -> Path:
    meta = {
        "rows": block.rows,
        "cols": block.cols,
        "sample_rate_mhz": block.sample_rate_mhz,
        "kind": block.kind,
    }
    meta.update(block.extra)
    return write_payload(path, block.data, meta)


def read_signal_block(path) -> SignalBlock:
    flat, meta = read_payload(path)
    for key in ("rows", "cols", "kind"):
        if key not in meta:
            raise ContainerError(f"{path}: sidecar missing {key!r}")
    rows, cols = int(meta["rows"]), int(meta["cols"])
    if flat.size != rows * cols:
        raise ContainerError(f"{path}: payload has {flat.size} values, sidecar says {rows}x{cols}")
    extra = {k: v for k, v in meta.items()
             if k not in ("rows", "cols", "sample_rate_mhz", "kind", "dtype")}
    return SignalBlock(flat.astype(np.float64).reshape(rows, cols),
                       sample_rate_mhz=float(meta.get("sample_rate_mhz", 0.0)),
                       kind=str(meta["kind"]), extra=extra)


# ---------------------------------------------------------------------------
# 16-bit portable graymap for projection images
# ---------------------------------------------------------------------------

def write_pgm16(path, image: np.ndarray, sidecar: dict | None = None) -> Path:
    """Normalize to [0, 65535] and write a binary 16-bit PGM (big-endian).

    The affine mapping used for normalization is recorded in a JSON
    sidecar next to the image so values remain recoverable.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = np.asarray(image, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((img - lo) / span * 65535.0).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii")
    path.write_bytes(header + scaled.tobytes())
    meta = {"kind": "projection", "min_value": lo, "max_value": hi,
            "rows": img.shape[0], "cols": img.shape[1]}
    if sidecar:
        meta.update(sidecar)
    path.with_suffix(".json").write_bytes(canonical_json_bytes(meta))
    return path
