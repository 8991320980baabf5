"""Geometry-aware wearable-sensor simulation and tokenization toolkit.

Pipeline: mesh + motion containers -> candidate sensor placements on the
body surface -> simulated accelerometer/gyroscope windows -> paired,
rotation-augmented, visibility-masked graph views -> product-quantized
token sequences, with training objectives and executable invariant suites
alongside.
"""

from ._kernels import BACKEND, HAVE_EXT
from .body import (
    BodyError,
    BodyModel,
    MotionSequence,
    lbs_affines,
    load_motion_container,
    pose_mesh_lbs,
    posed_vertices_all,
    resample_motion,
)
from .formats import FormatError
from .imusim import (
    GRAVITY,
    STANDARD_GRAVITY,
    ImuWindow,
    NoisePrior,
    QuietWindowConfig,
    SensorTrajectory,
    SimulationError,
    apply_noise,
    derive_window_seed,
    estimate_noise_prior,
    mounting_rotation,
    sensor_trajectory,
    simulate_accelerometer,
    simulate_gyroscope,
    simulate_window,
)
from .objectives import (
    ObjectiveError,
    commitment_loss,
    infonce_cross_view,
    itc_loss,
    label_contrastive_loss,
    mcvpcl_loss,
    seq_cosine_similarity,
    smooth_l1,
)
from .placement import (
    PlacementCandidate,
    PlacementError,
    SegmentSurface,
    anatomical_axis,
    enumerate_placements,
    local_offset,
    select_candidate_vertices,
    surface_frame,
    tangent_direction,
    vertex_normal,
)
from .sampler import (
    GraphWindow,
    SamplerError,
    ViewConfig,
    ViewSpec,
    apply_mask,
    build_paired_views,
    build_view,
    export_pretraining_shard,
    load_pretraining_shard,
    rotate_imu_signal,
    sample_full_view,
    sample_visibility_mask,
    slice_motion_windows,
)
from .tokenizer import (
    Codebooks,
    FitConfig,
    TokenizerError,
    codebook_diagnostics,
    dead_code_refresh,
    deinterleave_tokens,
    ema_update,
    encode_window,
    fit_codebooks,
    interleave_tokens,
    perplexity,
    quantize,
    reference_featurize,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BodyError",
    "BodyModel",
    "Codebooks",
    "FitConfig",
    "FormatError",
    "GRAVITY",
    "GraphWindow",
    "HAVE_EXT",
    "ImuWindow",
    "MotionSequence",
    "NoisePrior",
    "ObjectiveError",
    "PlacementCandidate",
    "PlacementError",
    "QuietWindowConfig",
    "SamplerError",
    "SegmentSurface",
    "SensorTrajectory",
    "SimulationError",
    "STANDARD_GRAVITY",
    "TokenizerError",
    "ViewConfig",
    "ViewSpec",
    "anatomical_axis",
    "apply_mask",
    "apply_noise",
    "build_paired_views",
    "build_view",
    "codebook_diagnostics",
    "commitment_loss",
    "dead_code_refresh",
    "deinterleave_tokens",
    "derive_window_seed",
    "ema_update",
    "encode_window",
    "enumerate_placements",
    "estimate_noise_prior",
    "export_pretraining_shard",
    "fit_codebooks",
    "infonce_cross_view",
    "interleave_tokens",
    "itc_loss",
    "label_contrastive_loss",
    "lbs_affines",
    "load_motion_container",
    "load_pretraining_shard",
    "local_offset",
    "mcvpcl_loss",
    "mounting_rotation",
    "perplexity",
    "pose_mesh_lbs",
    "posed_vertices_all",
    "quantize",
    "reference_featurize",
    "resample_motion",
    "rotate_imu_signal",
    "sample_full_view",
    "sample_visibility_mask",
    "select_candidate_vertices",
    "sensor_trajectory",
    "seq_cosine_similarity",
    "simulate_accelerometer",
    "simulate_gyroscope",
    "simulate_window",
    "slice_motion_windows",
    "smooth_l1",
    "surface_frame",
    "tangent_direction",
    "vertex_normal",
]
