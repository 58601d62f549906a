"""Saliency-gated augmentation for contrastive pre-training.

The package turns eye-tracking logs into dense saliency maps, uses them to
gate image augmentations (cutout / resized crop / masking) through an
IOU rejection loop, and ships a small, fully deterministic contrastive
harness (InfoNCE and BYOL objectives with analytic gradients) to measure
the effect of gated versus random augmentation on linear-probe accuracy.
"""

__version__ = "0.1.0"

from .errors import ConfigError, GazeAugError, ParseError, RejectionFailure
from .gaze import (
    GazeLog,
    GazePoint,
    KernelSpec,
    filter_gaze,
    gaussian_kernel,
    parse_gaze_log,
    parse_gaze_logs,
    render_gaze_map,
)
from .formats import (
    read_checkpoint,
    read_pgm,
    read_smap,
    write_checkpoint,
    write_pgm,
    write_smap,
)
from .saliency import SaliencySource, saliency_for, spectral_residual
from .augment import (
    AugmentSpec,
    FocusConfig,
    ViewPair,
    apply_chain,
    focus_crop_pair,
    focus_cutout_pair,
    focus_mask,
    generate_pair,
    iou,
    photometric_and_geometric,
    random_cutout,
    random_resized_crop,
    salient_region,
    survival_mask,
)
from .synth import SynthSample, SynthSpec, dump_dataset, gen_dataset, gen_sample, load_dataset
from .encoder import EncoderState, encode, init_encoder
from .losses import byol_loss, ema_update, info_nce_loss
from .train import (
    ProbeResult,
    TrainConfig,
    fit_linear_probe,
    grad_check,
    linear_probe,
    pretrain,
)
from .sweep import SweepGrid, SweepResult, lesion_preservation, overlap_score, run_sweep
from .rng import derive_rng

__all__ = [
    "AugmentSpec",
    "ConfigError",
    "EncoderState",
    "FocusConfig",
    "GazeAugError",
    "GazeLog",
    "GazePoint",
    "KernelSpec",
    "ParseError",
    "ProbeResult",
    "RejectionFailure",
    "SaliencySource",
    "SweepGrid",
    "SweepResult",
    "SynthSample",
    "SynthSpec",
    "TrainConfig",
    "ViewPair",
    "apply_chain",
    "byol_loss",
    "derive_rng",
    "dump_dataset",
    "ema_update",
    "encode",
    "filter_gaze",
    "fit_linear_probe",
    "focus_crop_pair",
    "focus_cutout_pair",
    "focus_mask",
    "gaussian_kernel",
    "gen_dataset",
    "gen_sample",
    "generate_pair",
    "grad_check",
    "info_nce_loss",
    "init_encoder",
    "iou",
    "lesion_preservation",
    "linear_probe",
    "load_dataset",
    "overlap_score",
    "parse_gaze_log",
    "parse_gaze_logs",
    "photometric_and_geometric",
    "pretrain",
    "random_cutout",
    "random_resized_crop",
    "read_checkpoint",
    "read_pgm",
    "read_smap",
    "render_gaze_map",
    "run_sweep",
    "saliency_for",
    "salient_region",
    "spectral_residual",
    "survival_mask",
    "write_checkpoint",
    "write_pgm",
    "write_smap",
]
