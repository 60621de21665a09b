"""Standalone command: compressed block + matrix file -> reconstruction.

Reads the binary+JSON compressed container and the ternary matrix file
written by the acquisition pipeline, trains the implicit representation,
and writes the estimate as a signal-block container with kind
``reconstructed`` so the pipeline's external ingestion accepts it
unchanged.  Exit codes: 0 success, 2 bad arguments, 3 bad data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from cspar import (ContainerError, SignalBlock, load_matrix,
                   read_compressed_block, write_signal_block)

from .model import InrConfig
from .train import TrainingError, train_inr


def reconstruct_file(compressed_path, matrix_path, out_path,
                     cfg: InrConfig | None = None,
                     sample_rate_mhz: float = 20.41) -> Path:
    """Run the full file-level contract; returns the sidecar path."""
    compressed, _ = read_compressed_block(compressed_path)
    try:
        phi = load_matrix(matrix_path)
    except (OSError, ValueError) as exc:
        raise ContainerError(f"matrix file {matrix_path}: {exc}") from exc
    if phi.matrix_id != compressed.matrix_id:
        raise ContainerError(
            f"matrix {matrix_path} (id {phi.matrix_id}) does not pair with "
            f"{compressed_path} (id {compressed.matrix_id})")
    result = train_inr(compressed, phi, cfg)
    block = SignalBlock(result.estimates, sample_rate_mhz=sample_rate_mhz,
                        kind="reconstructed",
                        extra={"method": "inr",
                               "lam": result.lam,
                               "iterations": result.iterations_used,
                               "final_objective": result.final_objective,
                               "objective_trace": list(result.objective_trace)})
    return write_signal_block(out_path, block)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inr-recon",
        description="Implicit-neural reconstruction of a ternary-compressed "
                    "acquisition block.")
    parser.add_argument("--compressed", required=True,
                        help="compressed container stem, .bin, or .json path")
    parser.add_argument("--matrix", required=True,
                        help="ternary measurement matrix JSON file")
    parser.add_argument("--out", required=True,
                        help="output container stem for the reconstruction")
    parser.add_argument("--iterations", type=int, default=400)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--wavelet-reg", type=float, default=1e-4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sample-rate", type=float, default=20.41,
                        help="sample rate recorded in the output metadata, MHz")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = InrConfig(iterations=args.iterations,
                        learning_rate=args.learning_rate,
                        wavelet_reg_weight=args.wavelet_reg,
                        seed=args.seed)
    except ValueError as exc:
        print(f"inr-recon: bad arguments: {exc}", file=sys.stderr)
        return 2
    try:
        sidecar = reconstruct_file(args.compressed, args.matrix, args.out,
                                   cfg, sample_rate_mhz=args.sample_rate)
    except (ContainerError, TrainingError, ValueError) as exc:
        print(f"inr-recon: {exc}", file=sys.stderr)
        return 3
    print(sidecar)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
