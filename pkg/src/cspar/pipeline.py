"""Experiment orchestration: staged runs with validated configs and manifests.

A run is one JSON configuration file driving the chain
simulate -> compress -> reconstruct -> image, plus standalone metrology
stages.  Every stage reads its inputs from the run directory, writes
deterministic artifacts there, and appends a manifest entry with input
and output digests so partial re-runs can be audited.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .afe import AfeConfig, apply_afe
from .blockio import (ContainerError, SignalBlock, canonical_json_bytes,
                      read_signal_block, sha256_file, write_signal_block)
from .imaging import ImageVolume, backproject, ssim3d, write_projections, write_volume
from .matrices import (MeasurementMatrix, empirical_rip,
                       identifiable_random_ternary, identity_schedule,
                       load_matrix, pca_ternary, random_ternary, save_matrix)
from .metrics import (comparator_sigma_for_sndr, linearity_input_sweep,
                      linearity_weight_sweep, sndr_sine)
from .mvm_adc import (AdcConfig, CompressedBlock, compress_block, dequantize,
                      quantize, read_compressed_block, write_compressed_block)
from .phantom import (AcousticConfig, Phantom, PointAbsorber, TransducerArray,
                      emulate_scan, generate_hair_phantom,
                      generate_ishape_phantom, grid_schedule)
from .recon import FistaConfig, fista_reconstruct

__all__ = [
    "ConfigError",
    "DataError",
    "cmd_compress",
    "cmd_image",
    "cmd_metrics",
    "cmd_reconstruct",
    "cmd_rip_check",
    "cmd_simulate",
    "cmd_sweep_linearity",
    "config_sha256",
    "load_config",
    "validate_config",
]


class ConfigError(ValueError):
    """Configuration rejected before any work starts (CLI exit code 2)."""


class DataError(ValueError):
    """Artifacts missing or inconsistent at run time (CLI exit code 3)."""


# ---------------------------------------------------------------------------
# configuration schema and defaults
# ---------------------------------------------------------------------------

_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "out_dir": {"type": "string", "minLength": 1},
        "phantom": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["hair", "ishape", "points", "empty"]},
                "seed": {"type": "integer", "minimum": 0},
                "points": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 4, "maxItems": 4,
                              "items": {"type": "number"}},
                },
            },
        },
        "array": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rows": {"type": "integer", "minimum": 1},
                "cols": {"type": "integer", "minimum": 1},
                "pitch": {"type": "number", "exclusiveMinimum": 0},
                "center_frequency": {"type": "number", "exclusiveMinimum": 0},
                "fractional_bandwidth": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "acoustics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sound_speed": {"type": "number", "exclusiveMinimum": 0},
                "sample_rate": {"type": "number", "exclusiveMinimum": 0},
                "num_samples": {"type": "integer", "minimum": 1},
                "attenuation_db_cm_mhz": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
            },
        },
        "afe": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "input_peak_v": {"type": "number", "exclusiveMinimum": 0},
                "pga_gain": {"enum": [8, 16, 32, 64]},
                "lpf_cutoff": {"type": "number", "exclusiveMinimum": 0},
                "input_noise_density": {"type": "number", "minimum": 0},
                "noise_seed": {"type": "integer", "minimum": 0},
            },
        },
        "compression": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_rows": {"type": "integer", "minimum": 1, "maximum": 4},
                "matrix": {"enum": ["pca", "random", "identifiable", "identity", "file"]},
                "matrix_file": {"type": ["string", "null"]},
                "matrix_seed": {"type": "integer", "minimum": 0},
                "zero_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                "deadzone": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "adc": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "bits": {"type": "integer", "minimum": 2, "maximum": 24},
                        "full_scale": {"type": "number", "exclusiveMinimum": 0},
                        "cap_mismatch_sigma": {"type": "number", "minimum": 0},
                        "comparator_noise_sigma": {"type": "number", "minimum": 0},
                        "seed": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "reconstruction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["fista", "external-inr"]},
                "lam": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "lam_factor": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "minimum": 0},
                "inr_dir": {"type": ["string", "null"]},
            },
        },
        "imaging": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "origin": {"type": "array", "minItems": 3, "maxItems": 3,
                           "items": {"type": "number"}},
                "dims": {"type": "array", "minItems": 3, "maxItems": 3,
                         "items": {"type": "integer", "minimum": 1}},
                "spacing": {"type": "array", "minItems": 3, "maxItems": 3,
                            "items": {"type": "number", "exclusiveMinimum": 0}},
                "band_mhz": {"type": ["array", "null"], "minItems": 2, "maxItems": 2,
                             "items": {"type": "number", "exclusiveMinimum": 0}},
                "derivative_term": {"type": "boolean"},
            },
        },
        "linearity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "amplitudes_vpp": {"type": "array", "minItems": 1,
                                   "items": {"type": "number", "exclusiveMinimum": 0}},
                "combos_per_sum": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "rip": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sparsity": {"type": "integer", "minimum": 1},
                "trials": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
    "required": ["out_dir"],
}

_DEFAULTS = {
    "phantom": {"kind": "hair", "seed": 0, "points": []},
    "array": {"rows": 4, "cols": 4, "pitch": 1.0,
              "center_frequency": 3.5, "fractional_bandwidth": 1.0},
    "acoustics": {"sound_speed": 1500.0, "sample_rate": 20.41,
                  "num_samples": 256, "attenuation_db_cm_mhz": 0.0, "seed": 0},
    "schedule": {"nx": 1, "ny": 6},
    "afe": {"enabled": False, "input_peak_v": 0.004, "pga_gain": 64,
            "lpf_cutoff": 10.35, "input_noise_density": 3.5, "noise_seed": 0},
    "compression": {"n_rows": 4, "matrix": "pca", "matrix_file": None,
                    "matrix_seed": 0, "zero_fraction": 1.0 / 3.0, "deadzone": 0.35,
                    "adc": {"bits": 10, "full_scale": 1.0, "cap_mismatch_sigma": 0.0,
                            "comparator_noise_sigma": 0.0, "seed": 0}},
    "reconstruction": {"method": "fista", "lam": None, "lam_factor": 0.001,
                       "max_iterations": 200, "tolerance": 0.0, "inr_dir": None},
    "imaging": {"origin": [0.0, 0.0, 4.0], "dims": [4, 24, 21],
                "spacing": [1.0, 1.0, 0.5], "band_mhz": [1.75, 5.25],
                "derivative_term": False},
    "linearity": {"amplitudes_vpp": [0.001, 0.002, 0.004, 0.008],
                  "combos_per_sum": 50, "seed": 0},
    "rip": {"sparsity": 2, "trials": 2000, "seed": 0},
}


def _merge(base, override):
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def validate_config(doc: dict, base_dir=".") -> dict:
    """Fill defaults, check the schema, and verify referenced files exist."""
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a JSON object, got {type(doc).__name__}")
    merged = _merge(_DEFAULTS, doc)
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(merged), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in err.absolute_path) or "(top level)"
        problems.append(f"{path}: {err.message}")
    if problems:
        raise ConfigError("; ".join(problems))
    comp = merged["compression"]
    if comp["matrix"] == "file":
        if not comp["matrix_file"]:
            raise ConfigError("compression.matrix_file: required when compression.matrix is 'file'")
        path = Path(base_dir) / comp["matrix_file"]
        if not path.exists():
            raise ConfigError(f"compression.matrix_file: {path} does not exist")
        comp["matrix_file"] = str(path)
    if merged["phantom"]["kind"] == "points" and not merged["phantom"]["points"]:
        raise ConfigError("phantom.points: at least one [x, y, z, amplitude] entry "
                          "is required when phantom.kind is 'points'")
    return merged


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return validate_config(doc, base_dir=path.parent)


def apply_seed_override(cfg: dict, seed: int) -> dict:
    """Point every stage seed at one value, for quick reseeded reruns."""
    cfg = json.loads(json.dumps(cfg))
    cfg["phantom"]["seed"] = seed
    cfg["acoustics"]["seed"] = seed
    cfg["afe"]["noise_seed"] = seed
    cfg["compression"]["matrix_seed"] = seed
    cfg["compression"]["adc"]["seed"] = seed
    cfg["linearity"]["seed"] = seed
    cfg["rip"]["seed"] = seed
    return cfg


def config_sha256(cfg: dict) -> str:
    """Digest of the scientific parameters; the destination directory is not one."""
    body = {k: v for k, v in cfg.items() if k != "out_dir"}
    return hashlib.sha256(canonical_json_bytes(body)).hexdigest()


# ---------------------------------------------------------------------------
# constructors from config sections
# ---------------------------------------------------------------------------

def _domain(section: str, ctor, /, **kwargs):
    try:
        return ctor(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _array(cfg) -> TransducerArray:
    a = cfg["array"]
    return _domain("array", TransducerArray, rows=a["rows"], cols=a["cols"],
                   pitch=a["pitch"], center_frequency=a["center_frequency"],
                   fractional_bandwidth=a["fractional_bandwidth"])


def _acoustics(cfg) -> AcousticConfig:
    a = cfg["acoustics"]
    return _domain("acoustics", AcousticConfig, sound_speed=a["sound_speed"],
                   sample_rate=a["sample_rate"], num_samples=a["num_samples"],
                   seed=a["seed"])


def _phantom(cfg) -> Phantom:
    p = cfg["phantom"]
    if p["kind"] == "hair":
        return generate_hair_phantom(p["seed"])
    if p["kind"] == "ishape":
        return generate_ishape_phantom()
    if p["kind"] == "empty":
        return Phantom((), name="empty")
    pts = tuple(_domain("phantom.points", PointAbsorber,
                        position=(x, y, z), amplitude=amp)
                for x, y, z, amp in p["points"])
    return Phantom(pts, name="points")


def _adc(cfg) -> AdcConfig:
    a = cfg["compression"]["adc"]
    return _domain("compression.adc", AdcConfig, bits=a["bits"],
                   full_scale=a["full_scale"],
                   cap_mismatch_sigma=a["cap_mismatch_sigma"],
                   comparator_noise_sigma=a["comparator_noise_sigma"],
                   seed=a["seed"])


def _afe_config(cfg) -> AfeConfig:
    a = cfg["afe"]
    return _domain("afe", AfeConfig, pga_gain=a["pga_gain"],
                   lpf_cutoff=a["lpf_cutoff"],
                   input_noise_density=a["input_noise_density"],
                   noise_seed=a["noise_seed"])


# ---------------------------------------------------------------------------
# manifest plumbing
# ---------------------------------------------------------------------------

def _manifest_path(out_dir: Path) -> Path:
    return out_dir / "manifest.json"


def _load_manifest(out_dir: Path, cfg: dict) -> dict:
    path = _manifest_path(out_dir)
    digest = config_sha256(cfg)
    if path.exists():
        doc = json.loads(path.read_text())
        if doc.get("config_sha256") != digest:
            raise DataError(
                f"{path} belongs to a different configuration "
                f"({doc.get('config_sha256', 'missing')[:12]} != {digest[:12]}); "
                "use a fresh output directory")
        return doc
    import scipy
    return {
        "config_sha256": digest,
        "versions": {"cspar": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": sys.version.split()[0]},
        "stages": {},
    }


def _record_stage(out_dir: Path, cfg: dict, stage: str,
                  inputs: list[Path], outputs: list[Path], wall: float,
                  extra: dict | None = None) -> None:
    doc = _load_manifest(out_dir, cfg)
    entry = {
        "inputs": {p.name: sha256_file(p) for p in sorted(inputs)},
        "outputs": {p.name: sha256_file(p) for p in sorted(outputs)},
        "wall_clock_s": round(wall, 3),
    }
    if extra:
        entry.update(extra)
    doc["stages"][stage] = entry
    _manifest_path(out_dir).write_bytes(canonical_json_bytes(doc))


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _with_pair(path: Path) -> list[Path]:
    return [path.with_suffix(".bin"), path.with_suffix(".json")]


def _positions(cfg) -> int:
    return cfg["schedule"]["nx"] * cfg["schedule"]["ny"]


def _require(paths: list[Path], hint: str) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if not missing:
        return
    also = f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""
    raise DataError(f"missing {missing[0]}{also}; run '{hint}' first")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict, jobs: int = 1) -> list[Path]:
    """Emulate the scan and write raw plus front-end blocks."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    array = _array(cfg)
    ac = _acoustics(cfg)
    sched = grid_schedule(array, cfg["schedule"]["nx"], cfg["schedule"]["ny"])
    phantom = _phantom(cfg)
    try:
        blocks = emulate_scan(phantom, array, ac, sched,
                              attenuation_db_cm_mhz=cfg["acoustics"]["attenuation_db_cm_mhz"])
    except ValueError as exc:
        raise ConfigError(f"acoustics: {exc}") from exc
    peak = max(float(np.max(np.abs(b.data))) for b in blocks)
    outputs = []
    afe_cfg = _afe_config(cfg)
    for idx, block in enumerate(blocks):
        raw_path = out / f"raw_p{idx:02d}"
        write_signal_block(raw_path, block)
        outputs += _with_pair(raw_path)
        if cfg["afe"]["enabled"]:
            scale = cfg["afe"]["input_peak_v"] / peak if peak > 0 else 1.0
            drive = SignalBlock(block.data * scale, sample_rate_mhz=ac.sample_rate,
                                kind="raw", extra=block.extra)
            front = apply_afe(drive, afe_cfg, ac)
            front.extra.update({"scale": scale, "afe": "applied"})
        else:
            scale = 0.9 / peak if peak > 0 else 1.0
            front = SignalBlock(block.data * scale, sample_rate_mhz=ac.sample_rate,
                                kind="afe", extra=dict(block.extra))
            front.extra.update({"scale": scale, "afe": "bypassed"})
        afe_path = out / f"afe_p{idx:02d}"
        write_signal_block(afe_path, front)
        outputs += _with_pair(afe_path)
    _record_stage(out, cfg, "simulate", [], outputs, time.perf_counter() - t0,
                  {"positions": len(blocks), "phantom": phantom.name})
    return outputs


def _calibration_capture(signals: np.ndarray, adc: AdcConfig) -> np.ndarray:
    """Uncompressed capture through the converter via the one-hot schedule."""
    cal_cfg = replace(adc, full_scale=adc.full_scale / 16.0)
    codes = np.vstack([compress_block(signals, sub, cal_cfg).codes
                       for sub in identity_schedule(signals.shape[0])])
    return dequantize(codes, cal_cfg.lsb) * 16.0


def _build_matrix(cfg, signals: np.ndarray, adc: AdcConfig) -> MeasurementMatrix:
    comp = cfg["compression"]
    kind = comp["matrix"]
    n = comp["n_rows"]
    if kind == "pca":
        return pca_ternary(_calibration_capture(signals, adc), n, comp["deadzone"])
    if kind == "random":
        return random_ternary(n, signals.shape[0], comp["zero_fraction"], comp["matrix_seed"])
    if kind == "identifiable":
        return identifiable_random_ternary(n, signals.shape[0], comp["zero_fraction"],
                                           comp["matrix_seed"])
    if kind == "identity":
        return MeasurementMatrix(np.eye(signals.shape[0], dtype=np.int8))
    return load_matrix(comp["matrix_file"])


def cmd_compress(cfg: dict, jobs: int = 1) -> list[Path]:
    """Compress each front-end block through the converter model."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    n_pos = _positions(cfg)
    afe_paths = [out / f"afe_p{idx:02d}" for idx in range(n_pos)]
    _require([p.with_suffix(".json") for p in afe_paths], "simulate")
    adc = _adc(cfg)
    comp = cfg["compression"]
    inputs, outputs = [], []
    total_rows = 0
    for idx, path in enumerate(afe_paths):
        block = read_signal_block(path)
        inputs += _with_pair(path)
        phi = _build_matrix(cfg, block.data, adc)
        if comp["matrix"] in ("pca",):
            mat_path = out / f"matrix_p{idx:02d}.json"
        else:
            mat_path = out / "matrix.json"
        save_matrix(mat_path, phi)
        if mat_path not in outputs:
            outputs.append(mat_path)
        if comp["matrix"] == "identity":
            # uncompressed reference capture: one-hot rows over several passes
            cal_cfg = replace(adc, full_scale=adc.full_scale / 16.0)
            codes = np.vstack([compress_block(block.data, sub, cal_cfg).codes
                               for sub in identity_schedule(block.rows, comp["n_rows"])])
            compressed = CompressedBlock(codes=codes, scale=cal_cfg.lsb,
                                         matrix_id=phi.matrix_id, bits=adc.bits)
        else:
            try:
                compressed = compress_block(block.data, phi, adc)
            except ValueError as exc:
                raise DataError(f"position {idx}: {exc}") from exc
        total_rows += compressed.n_rows
        comp_path = out / f"compressed_p{idx:02d}"
        write_compressed_block(comp_path, compressed, matrix_file=mat_path.name)
        outputs += _with_pair(comp_path)
    ratio = (n_pos * 16) / total_rows
    _record_stage(out, cfg, "compress", inputs, outputs, time.perf_counter() - t0,
                  {"compression_ratio": round(ratio, 6)})
    return outputs


def _reconstruct_one(args):
    codes_path, mat_path, lam, lam_factor, max_iter, tol = args
    compressed, _ = read_compressed_block(codes_path)
    phi = load_matrix(mat_path)
    if lam is None:
        yv = dequantize(compressed.codes, compressed.scale) * 16.0
        lam = lam_factor * float(np.max(np.abs(phi.entries.astype(np.float64).T @ yv)))
    fista_cfg = FistaConfig(lam=lam, max_iterations=max_iter, tolerance=tol)
    return fista_reconstruct(compressed, phi, fista_cfg)


def cmd_reconstruct(cfg: dict, jobs: int = 1) -> list[Path]:
    """Recover full-array blocks from the compressed captures."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    n_pos = _positions(cfg)
    comp_paths = [out / f"compressed_p{idx:02d}" for idx in range(n_pos)]
    _require([p.with_suffix(".json") for p in comp_paths], "compress")
    rc = cfg["reconstruction"]
    inputs, outputs = [], []
    if rc["method"] == "external-inr":
        if not rc["inr_dir"]:
            raise ConfigError("reconstruction.inr_dir: required for method 'external-inr'")
        ext_dir = Path(rc["inr_dir"])
        for idx, comp_path in enumerate(comp_paths):
            ext_path = ext_dir / f"recon_p{idx:02d}"
            if not ext_path.with_suffix(".json").exists():
                raise DataError(
                    f"external reconstruction {ext_path}.json not found; produce it with "
                    f"the INR tool from {comp_path}.bin and its matrix, then rerun")
            try:
                block = read_signal_block(ext_path)
            except ContainerError as exc:
                raise DataError(f"{ext_path}: {exc}") from exc
            if block.kind != "reconstructed":
                raise DataError(f"{ext_path}: kind {block.kind!r} is not 'reconstructed'")
            compressed, _ = read_compressed_block(comp_path)
            if block.cols != compressed.num_samples:
                raise DataError(f"{ext_path}: {block.cols} samples, "
                                f"expected {compressed.num_samples}")
            inputs += _with_pair(ext_path)
            recon_path = out / f"recon_p{idx:02d}"
            write_signal_block(recon_path, block)
            outputs += _with_pair(recon_path)
        _record_stage(out, cfg, "reconstruct", inputs, outputs,
                      time.perf_counter() - t0, {"method": "external-inr"})
        return outputs
    tasks = []
    for comp_path in comp_paths:
        _, mat_name = read_compressed_block(comp_path)
        if not mat_name:
            raise DataError(f"{comp_path}.json does not name a matrix file")
        mat_path = out / mat_name
        if not mat_path.exists():
            raise DataError(f"matrix file {mat_path} is missing; rerun 'compress'")
        inputs += _with_pair(comp_path) + [mat_path]
        tasks.append((comp_path, mat_path, rc["lam"], rc["lam_factor"],
                      rc["max_iterations"], rc["tolerance"]))
    try:
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_reconstruct_one, tasks))
        else:
            results = [_reconstruct_one(t) for t in tasks]
    except (ConfigError, DataError):
        raise
    except (ValueError, ContainerError) as exc:
        raise DataError(f"reconstruction failed: {exc}") from exc
    sample_rate = cfg["acoustics"]["sample_rate"]
    for idx, result in enumerate(results):
        block = SignalBlock(result.estimates, sample_rate_mhz=sample_rate,
                            kind="reconstructed",
                            extra={"lam": result.lam,
                                   "iterations": result.iterations_used,
                                   "final_objective": result.final_objective,
                                   "objective_trace": list(result.objective_trace)})
        recon_path = out / f"recon_p{idx:02d}"
        write_signal_block(recon_path, block)
        outputs += _with_pair(recon_path)
    _record_stage(out, cfg, "reconstruct", inputs, outputs,
                  time.perf_counter() - t0, {"method": "fista"})
    return outputs


def cmd_image(cfg: dict, jobs: int = 1) -> list[Path]:
    """Backproject reference and reconstructed blocks and score them."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    n_pos = _positions(cfg)
    afe_paths = [out / f"afe_p{idx:02d}" for idx in range(n_pos)]
    recon_paths = [out / f"recon_p{idx:02d}" for idx in range(n_pos)]
    _require([p.with_suffix(".json") for p in afe_paths], "simulate")
    _require([p.with_suffix(".json") for p in recon_paths], "reconstruct")
    manifest = _load_manifest(out, cfg)
    if "compress" not in manifest["stages"]:
        raise DataError("no compress entry in the manifest; run 'compress' first")
    ratio = manifest["stages"]["compress"]["compression_ratio"]
    array = _array(cfg)
    ac = _acoustics(cfg)
    sched = grid_schedule(array, cfg["schedule"]["nx"], cfg["schedule"]["ny"])
    img_cfg = cfg["imaging"]
    band = tuple(img_cfg["band_mhz"]) if img_cfg["band_mhz"] else None
    inputs = []
    ref_blocks, est_blocks = [], []
    for path in afe_paths:
        ref_blocks.append(read_signal_block(path))
        inputs += _with_pair(path)
    for path in recon_paths:
        est_blocks.append(read_signal_block(path))
        inputs += _with_pair(path)
    def form(blocks):
        try:
            return backproject(blocks, array, ac, img_cfg["origin"], img_cfg["dims"],
                               spacing=tuple(img_cfg["spacing"]), schedule=sched,
                               band_mhz=band, derivative_term=img_cfg["derivative_term"])
        except ValueError as exc:
            raise DataError(f"imaging: {exc}") from exc
    ref_vol = form(ref_blocks)
    est_vol = form(est_blocks)
    try:
        score = ssim3d(est_vol, ref_vol)
    except ValueError as exc:
        raise DataError(f"imaging: {exc}") from exc
    denom = float(np.sum(ref_vol.voxels ** 2))
    img_nmse = float(np.sum((est_vol.voxels - ref_vol.voxels) ** 2) / denom) \
        if denom > 0 else None
    outputs = []
    for stem, vol in (("reference_volume", ref_vol), ("volume", est_vol)):
        write_volume(out / stem, vol)
        outputs += _with_pair(out / stem)
        for proj in write_projections(out / stem, vol):
            outputs += [proj, proj.with_suffix(".json")]
    report = {"ssim": score, "nmse": img_nmse, "compression_ratio": ratio}
    report_path = out / "report.json"
    report_path.write_bytes(canonical_json_bytes(report))
    outputs.append(report_path)
    _record_stage(out, cfg, "image", inputs, outputs, time.perf_counter() - t0)
    return outputs


def cmd_metrics(cfg: dict, jobs: int = 1) -> list[Path]:
    """Converter spectral report: theory ladder plus calibrated-noise arm."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    clean = replace(_adc(cfg), cap_mismatch_sigma=0.0, comparator_noise_sigma=0.0)
    k = 16384
    j = 1601
    rate = cfg["acoustics"]["sample_rate"]
    t = np.arange(k)
    report = {"ladder": [], "coherent_bin": j, "record": k}
    for bits in (10, 12, 16):
        adc = replace(clean, bits=bits)
        amp = adc.full_scale - adc.lsb / 2.0
        sine = amp * np.sin(2.0 * np.pi * j * t / k)
        res = sndr_sine(quantize(sine, adc), j / k * rate, rate)
        report["ladder"].append({"bits": bits, "sndr_db": res.sndr_db,
                                 "enob": res.enob})
    sigma = comparator_sigma_for_sndr(57.5, clean)
    amp = clean.full_scale - clean.lsb / 2.0
    sine = amp * np.sin(2.0 * np.pi * j * t / k)
    noise = np.random.default_rng(cfg["compression"]["adc"]["seed"]).normal(0.0, sigma, k)
    res = sndr_sine(quantize(sine, clean, noise), j / k * rate, rate)
    report["calibrated"] = {"target_sndr_db": 57.5, "comparator_sigma": sigma,
                            "sndr_db": res.sndr_db, "enob": res.enob}
    path = out / "metrics.json"
    path.write_bytes(canonical_json_bytes(report))
    _record_stage(out, cfg, "metrics", [], [path], time.perf_counter() - t0)
    return [path]


def cmd_sweep_linearity(cfg: dict, jobs: int = 1) -> list[Path]:
    """Weight and input linearity sweeps for the configured converter."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    adc = _adc(cfg)
    lin = cfg["linearity"]
    weight = linearity_weight_sweep(lin["amplitudes_vpp"], adc,
                                    combos_per_sum=lin["combos_per_sum"],
                                    seed=lin["seed"])
    inp = linearity_input_sweep(cfg=adc, seed=lin["seed"],
                                amplitudes=tuple(lin["amplitudes_vpp"])
                                if len(lin["amplitudes_vpp"]) >= 3
                                else (0.001, 0.002, 0.004, 0.008))
    report = {
        "weight_sweep": [{"label": r.label, "r_squared": r.r_squared,
                          "slope": r.slope} for r in weight],
        "input_sweep_min_r_squared": min(r.r_squared for r in inp),
        "input_sweep_count": len(inp),
    }
    path = out / "linearity.json"
    path.write_bytes(canonical_json_bytes(report))
    _record_stage(out, cfg, "sweep-linearity", [], [path], time.perf_counter() - t0)
    return [path]


def cmd_rip_check(cfg: dict, jobs: int = 1) -> list[Path]:
    """Isometry statistics for the configured measurement matrix."""
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    _load_manifest(out, cfg)
    comp = cfg["compression"]
    if comp["matrix"] == "pca":
        afe0 = out / "afe_p00"
        if not afe0.with_suffix(".json").exists():
            raise DataError("pca matrices are calibrated from afe_p00; run 'simulate' first")
        signals = read_signal_block(afe0).data
        phi = _build_matrix(cfg, signals, _adc(cfg))
    else:
        phi = _build_matrix(cfg, np.zeros((16, 16)), _adc(cfg))
    stats = empirical_rip(phi, cfg["rip"]["sparsity"], cfg["rip"]["trials"],
                          cfg["rip"]["seed"])
    report = {"matrix_id": phi.matrix_id, "n_rows": phi.n_rows,
              "sparsity": cfg["rip"]["sparsity"], "trials": cfg["rip"]["trials"],
              "delta": stats.delta, "min_ratio": stats.min_ratio,
              "max_ratio": stats.max_ratio}
    path = out / "rip.json"
    path.write_bytes(canonical_json_bytes(report))
    _record_stage(out, cfg, "rip-check", [], [path], time.perf_counter() - t0)
    return [path]
