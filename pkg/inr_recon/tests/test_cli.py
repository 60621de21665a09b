"""File contract: containers in, reconstruction container out, pipeline ingest."""

import json
import subprocess
import sys

import numpy as np
import pytest

from cspar import (AdcConfig, compress_block, random_ternary,
                   read_signal_block, save_matrix, write_compressed_block)
from inr_recon.cli import main


def small_artifacts(tmp_path, t_len=64, seed=9):
    rng = np.random.default_rng(seed)
    x = np.clip(rng.normal(0.0, 0.1, (16, t_len)), -0.9, 0.9)
    phi = random_ternary(4, 16, 1.0 / 3.0, seed)
    comp = compress_block(x, phi, AdcConfig())
    comp_path = tmp_path / "compressed_p00"
    write_compressed_block(comp_path, comp, matrix_file="matrix.json")
    save_matrix(tmp_path / "matrix.json", phi)
    return comp_path, tmp_path / "matrix.json"


def test_cli_writes_ingestible_container(tmp_path):
    comp_path, mat_path = small_artifacts(tmp_path)
    out_path = tmp_path / "recon_p00"
    rc = main(["--compressed", str(comp_path), "--matrix", str(mat_path),
               "--out", str(out_path), "--iterations", "25"])
    assert rc == 0
    block = read_signal_block(out_path)
    assert block.kind == "reconstructed"
    assert block.data.shape == (16, 64)
    assert block.extra["method"] == "inr"
    assert block.extra["iterations"] == 25
    assert len(block.extra["objective_trace"]) == 26
    assert block.sample_rate_mhz == pytest.approx(20.41)


def test_cli_rejects_mismatched_matrix(tmp_path, capsys):
    comp_path, _ = small_artifacts(tmp_path)
    other = tmp_path / "other.json"
    save_matrix(other, random_ternary(4, 16, 1.0 / 3.0, 77))
    rc = main(["--compressed", str(comp_path), "--matrix", str(other),
               "--out", str(tmp_path / "r"), "--iterations", "5"])
    assert rc == 3
    assert "does not pair" in capsys.readouterr().err


def test_cli_missing_compressed_is_data_error(tmp_path, capsys):
    _, mat_path = small_artifacts(tmp_path)
    rc = main(["--compressed", str(tmp_path / "nope"), "--matrix",
               str(mat_path), "--out", str(tmp_path / "r")])
    assert rc == 3


def test_cli_bad_iterations_is_usage_error(tmp_path, capsys):
    comp_path, mat_path = small_artifacts(tmp_path)
    rc = main(["--compressed", str(comp_path), "--matrix", str(mat_path),
               "--out", str(tmp_path / "r"), "--iterations", "0"])
    assert rc == 2
    assert "bad arguments" in capsys.readouterr().err


def test_module_entrypoint_runs(tmp_path):
    comp_path, mat_path = small_artifacts(tmp_path, t_len=32)
    proc = subprocess.run(
        [sys.executable, "-m", "inr_recon.cli",
         "--compressed", str(comp_path), "--matrix", str(mat_path),
         "--out", str(tmp_path / "r"), "--iterations", "5"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "r.json").exists()


def test_pipeline_external_ingestion_roundtrip(tmp_path):
    """simulate + compress, reconstruct externally, ingest bit for bit."""
    run_dir = tmp_path / "run"
    inr_dir = tmp_path / "inr"
    cfg = {
        "out_dir": str(run_dir),
        "phantom": {"kind": "points", "points": [[1.5, 1.5, 6.0, 1.0]]},
        "acoustics": {"num_samples": 128},
        "schedule": {"nx": 1, "ny": 1},
        "compression": {"n_rows": 4, "matrix": "random"},
        "reconstruction": {"method": "external-inr", "inr_dir": str(inr_dir)},
    }
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps(cfg))

    def pipeline(stage):
        return subprocess.run(
            [sys.executable, "-m", "cspar.cli", stage, "--config", str(cfg_path)],
            capture_output=True, text=True)

    assert pipeline("simulate").returncode == 0
    assert pipeline("compress").returncode == 0

    # without the external file the pipeline refuses with a pointer to us
    refusal = pipeline("reconstruct")
    assert refusal.returncode == 3
    assert "recon_p00" in refusal.stderr

    rc = main(["--compressed", str(run_dir / "compressed_p00"),
               "--matrix", str(run_dir / "matrix.json"),
               "--out", str(inr_dir / "recon_p00"), "--iterations", "25"])
    assert rc == 0
    ingest = pipeline("reconstruct")
    assert ingest.returncode == 0, ingest.stderr

    ours = read_signal_block(inr_dir / "recon_p00")
    theirs = read_signal_block(run_dir / "recon_p00")
    assert np.array_equal(ours.data, theirs.data)
    assert theirs.kind == "reconstructed"
    assert theirs.extra["method"] == "inr"
