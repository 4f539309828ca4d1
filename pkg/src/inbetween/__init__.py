"""Training-free keyframe inbetweening mechanisms on a toy video DiT stack.

Two inference-time controls for first/last-frame conditioned video
generation, plus the scaffolding to exercise them:

- an anchored cross-attention bias that steers every frame's attention over
  the condition keys toward an interpolation of the two keyframes' own
  attention patterns (``kab``), and
- a per-frame rescaling of temporal rotary angles that sharpens attention
  near the keyframes and widens it in the middle (``rope``).

``dit`` hosts the miniature denoiser, deterministic sampler, and the
content-free attention probe; ``metrics`` the desk-scale evaluation suite;
``bench`` manifests, runners, and reports; ``cli`` the command line.
"""

from .bench import (
    ManifestEntry,
    parse_manifest,
    run_ablate,
    run_generate,
    run_metrics,
    run_probe,
    serialize_manifest,
    subsample_indices,
    write_report,
)
from .config import ProbeConfig, RunConfig, load_config, parse_config
from .dit import (
    AttentionProfile,
    Counters,
    Denoiser,
    DitConfig,
    SampleResult,
    attention_probe,
    dit_forward,
    sample,
    self_attention,
)
from .errors import ConfigError, ManifestError
from .fixtures import CHALLENGES, make_fixture, write_fixture_set
from .kab import (
    CONDITION_NAMES,
    FrameAnchor,
    GuidanceSchedule,
    apply_kab,
    baseline_fusion_cross_attention,
    beta_at,
    frame_mean_attention,
    gate_active,
    interpolate_anchor,
    logit_bias,
    softmax_rows,
    triple_isolated_cross_attention,
)
from .latent import (
    ConditionSet,
    FrameGrid,
    TokenSequence,
    assemble_latent_sequence,
    encode_frame,
    decode_frame,
    frame_row_slice,
    latent_frame_count,
    token_index,
    token_positions,
)
from .metrics import (
    AdjacentReport,
    PaceReport,
    PsnrResult,
    SsimResult,
    adjacent_consistency,
    centroid_track,
    pace_stability,
    psnr,
    ssim,
)
from .rope import (
    RetroConfig,
    RopeFrequencyTable,
    apply_rope,
    build_frequency_rows,
    compute_w_edge,
    default_axis_split,
    edge_mid_sets,
    retro_scale,
    scale_factors,
)

__version__ = "0.1.0"
