"""Behavioral model of a compressive-sensing photoacoustic receiver.

The package covers the full chain: synthetic phantom acoustics, analog
front end, ternary-weighted MVM SAR ADC, sparse recovery, delay-and-sum
imaging, and converter metrology.  Each stage is importable on its own;
the ``cspar`` command drives them end to end from a JSON config.
"""

__version__ = "0.1.0"

from .afe import AfeConfig, apply_afe
from .blockio import ContainerError, SignalBlock, read_signal_block, write_signal_block
from .imaging import ImageVolume, backproject, max_intensity_projections, ssim3d
from .matrices import (MeasurementMatrix, block_diagonal, empirical_rip,
                       identifiable_random_ternary, identity_schedule,
                       l1_exposure_margins, load_matrix, pca_ternary,
                       random_ternary, save_matrix)
from .metrics import (comparator_sigma_for_sndr, linearity_input_sweep,
                      linearity_weight_sweep, nmse, sndr_sine)
from .mvm_adc import (AdcConfig, CompressedBlock, compress_block, dequantize,
                      ideal_mvm, quantize, read_compressed_block,
                      write_compressed_block)
from .phantom import (AcousticConfig, Phantom, PointAbsorber, ScanSchedule,
                      TransducerArray, emulate_scan, forward_simulate,
                      generate_hair_phantom, generate_ishape_phantom,
                      grid_schedule)
from .recon import (FistaConfig, ReconstructedBlock, fista_reconstruct,
                    select_lambda, soft_threshold)
from .wavelets import SparseBasis, dwt_forward, dwt_inverse

__all__ = [
    "AcousticConfig",
    "AdcConfig",
    "AfeConfig",
    "CompressedBlock",
    "ContainerError",
    "FistaConfig",
    "ImageVolume",
    "MeasurementMatrix",
    "Phantom",
    "PointAbsorber",
    "ReconstructedBlock",
    "ScanSchedule",
    "SignalBlock",
    "SparseBasis",
    "TransducerArray",
    "__version__",
    "apply_afe",
    "backproject",
    "block_diagonal",
    "comparator_sigma_for_sndr",
    "compress_block",
    "dequantize",
    "dwt_forward",
    "dwt_inverse",
    "empirical_rip",
    "emulate_scan",
    "fista_reconstruct",
    "forward_simulate",
    "generate_hair_phantom",
    "generate_ishape_phantom",
    "grid_schedule",
    "ideal_mvm",
    "identifiable_random_ternary",
    "identity_schedule",
    "l1_exposure_margins",
    "linearity_input_sweep",
    "linearity_weight_sweep",
    "load_matrix",
    "max_intensity_projections",
    "nmse",
    "pca_ternary",
    "quantize",
    "random_ternary",
    "read_compressed_block",
    "read_signal_block",
    "save_matrix",
    "select_lambda",
    "sndr_sine",
    "soft_threshold",
    "ssim3d",
    "write_compressed_block",
    "write_signal_block",
]
