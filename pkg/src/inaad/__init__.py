"""Inpainting-based noise-agnostic anomaly detection with diffusion models.

A numpy/scipy library (torch only for the trainable denoiser) covering:
seeded structured noise generation, the diffusion forward/reverse
processes, inpainting-constrained multi-level reconstruction with SSIM
anomaly scoring, detection metrics, a synthetic phantom dataset, and a
small CLI tying the pipeline together.
"""

from .schedule import NoiseSchedule, linear_schedule
from .noise import (
    PyramidParams,
    SimplexParams,
    sample_gaussian,
    sample_pyramid,
    sample_simplex,
    make_sampler,
)
from .denoiser import (
    Denoiser,
    ReferenceUNetConfig,
    zero_denoiser,
    planted_denoiser,
    build_unet,
)
from .diffusion import (
    forward_diffuse,
    reverse_step,
    TrainingBatch,
    sample_training_batch,
    training_loss,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    train,
    generate,
)
from .detect import (
    InaadConfig,
    AnomalyReport,
    inpaint_reverse_step,
    reconstruct_from_level,
    reconstruct_batch,
    inaad_score,
    score_images,
    anomaly_heatmap,
)
from .metrics import (
    SsimParams,
    ssim,
    LabeledScores,
    RocCurve,
    roc_curve,
    auroc,
    average_precision,
    GroupResult,
    evaluate_groups,
)
from .synthdata import (
    PhantomParams,
    AnomalySpec,
    Region,
    SplitCounts,
    ManifestRow,
    generate_normal,
    generate_anomalous,
    build_splits,
    load_manifest,
    ANOMALY_KINDS,
)
from .checkpoint import save_checkpoint, load_checkpoint, LoadedCheckpoint
from .seeding import derive_seed, make_rng

__version__ = "0.1.0"
