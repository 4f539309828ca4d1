"""Miniature video diffusion-transformer stack, deterministic sampler, and probe.

The denoiser is a small pre-norm transformer: rotary self-attention over the
frame-major token sequence, cross-attention to the three condition groups
(with the anchored bias gated per layer and step), and an MLP, all with
residuals.  Weights are seeded random projections; nothing is trained.  The
sampler runs a deterministic DDIM-style update on a linear signal schedule
and re-imposes the clean keyframe latents after every step, so frames 0 and
f-1 of the output always equal the inputs bit for bit.

The content-free attention probe measures how the temporal rescaling
redistributes self-attention: per seed, one random unit content vector is
shared by every token's query and key, so logits depend only on rotary phase
differences.  Per-frame local mass (fraction of attention within +/- window
frames) and row entropy are averaged over seeds for the vanilla and rescaled
tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .kab import (
    GuidanceSchedule,
    baseline_fusion_cross_attention,
    gate_active,
    softmax_rows,
    triple_isolated_cross_attention,
)
from .latent import ConditionSet, FrameGrid, TokenSequence, frame_row_slice, token_positions
from .rope import (
    RetroConfig,
    RopeFrequencyTable,
    apply_rope,
    build_frequency_rows,
    default_axis_split,
    retro_scale,
)
from .seeding import rng_for

FUSION_MODES = ("kab", "triple", "baseline")
ALPHA_BAR_MIN = 0.05  # signal level at the noisiest end of the linear schedule
LN_EPS = 1e-6


@dataclass(frozen=True)
class DitConfig:
    n_blocks: int = 8
    n_heads: int = 4
    head_dim: int = 16
    n_steps: int = 50
    seed: int = 0
    grid_h: int = 4
    grid_w: int = 4
    cond_dim: int = 48
    rope_base: float = 10000.0
    retro: RetroConfig | None = field(default_factory=RetroConfig)
    guidance: GuidanceSchedule = field(default_factory=GuidanceSchedule)
    fusion: str = "kab"

    def __post_init__(self) -> None:
        if self.n_blocks < 1:
            raise ValueError(f"n_blocks must be >= 1, got {self.n_blocks}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_heads < 1:
            raise ValueError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.head_dim < 2 or self.head_dim % 2 != 0:
            raise ValueError(f"head_dim must be even and >= 2, got {self.head_dim}")
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError("grid extents must be >= 1")
        if self.cond_dim < 1:
            raise ValueError(f"cond_dim must be >= 1, got {self.cond_dim}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")

    @property
    def hidden_dim(self) -> int:
        return self.n_heads * self.head_dim


@dataclass
class Counters:
    """Instrumentation totals accumulated over one sampler run."""

    denoiser_calls: int = 0
    cross_attention_calls: int = 0
    biased_cross_attention_calls: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "denoiser_calls": self.denoiser_calls,
            "cross_attention_calls": self.cross_attention_calls,
            "biased_cross_attention_calls": self.biased_cross_attention_calls,
        }


@dataclass
class SampleResult:
    latents: np.ndarray  # (f*l_q, hidden_dim)
    counters: Counters
    grid: FrameGrid


@dataclass
class AttentionProfile:
    """Per-frame self-attention statistics averaged over probe seeds."""

    local_mass: np.ndarray  # (f,)
    entropy: np.ndarray  # (f,) in nats
    window: int
    n_seeds: int


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    n, hidden = x.shape
    return x.reshape(n, n_heads, hidden // n_heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    heads, n, d_h = x.shape
    return x.transpose(1, 0, 2).reshape(n, heads * d_h)


def layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def time_features(step_idx: int, n_steps: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding of the normalized step position."""
    tau = step_idx / n_steps
    half = dim // 2
    freqs = 1000.0 ** (-np.arange(half, dtype=np.float64) / max(half, 1))
    feats = np.empty(dim, dtype=np.float64)
    feats[0::2] = np.sin(tau * 1000.0 * freqs)
    feats[1::2] = np.cos(tau * 1000.0 * freqs[: dim - half])
    return feats


class _BlockWeights:
    def __init__(self, rng: np.random.Generator, hidden: int, cond_dim: int) -> None:
        def mat(rows: int, cols: int) -> np.ndarray:
            return rng.standard_normal((rows, cols)) / math.sqrt(rows)

        self.wq_s = mat(hidden, hidden)
        self.wk_s = mat(hidden, hidden)
        self.wv_s = mat(hidden, hidden)
        self.wo_s = mat(hidden, hidden)
        self.wq_c = mat(hidden, hidden)
        self.wk_c = mat(cond_dim, hidden)
        self.wv_c = mat(cond_dim, hidden)
        self.wo_c = mat(hidden, hidden)
        self.w1 = mat(hidden, 4 * hidden)
        self.w2 = mat(4 * hidden, hidden)


class Denoiser:
    """Seeded toy denoiser bound to one latent frame count."""

    def __init__(self, cfg: DitConfig, f: int) -> None:
        self.cfg = cfg
        self.grid = FrameGrid(f=f, grid_h=cfg.grid_h, grid_w=cfg.grid_w, d=cfg.hidden_dim)
        self.positions = token_positions(self.grid)
        base = build_frequency_rows(
            cfg.head_dim,
            default_axis_split(cfg.head_dim),
            cfg.rope_base,
            f=f,
            grid_h=cfg.grid_h,
            grid_w=cfg.grid_w,
        )
        self.table = base if cfg.retro is None else retro_scale(base, cfg.retro, f)
        rng = rng_for(cfg.seed, 0xD17)
        self.blocks = [
            _BlockWeights(rng, cfg.hidden_dim, cfg.cond_dim) for _ in range(cfg.n_blocks)
        ]
        self.w_out = rng.standard_normal((cfg.hidden_dim, cfg.hidden_dim)) / math.sqrt(
            cfg.hidden_dim
        )

    def forward(
        self,
        values: np.ndarray,
        mask: np.ndarray,
        cond: ConditionSet,
        step_idx: int,
        counters: Counters | None = None,
    ) -> np.ndarray:
        """One denoiser evaluation; returns the noise prediction, same shape as values."""
        cfg = self.cfg
        x = np.asarray(values, dtype=np.float64).copy()
        # keyframe flag enters as a per-frame scalar offset; step enters sinusoidally
        x += np.repeat(np.asarray(mask, dtype=np.float64), self.grid.l_q)[:, None]
        x += time_features(step_idx, cfg.n_steps, cfg.hidden_dim)[None, :]
        for block_idx, blk in enumerate(self.blocks, start=1):
            x = x + self._self_attention(layer_norm(x), blk)
            x = x + self._cross_attention(layer_norm(x), blk, cond, block_idx, step_idx, counters)
            x = x + _gelu(layer_norm(x) @ blk.w1) @ blk.w2
        out = layer_norm(x) @ self.w_out
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("denoiser produced non-finite values")
        return out

    def _self_attention(self, x: np.ndarray, blk: _BlockWeights) -> np.ndarray:
        cfg = self.cfg
        q = apply_rope(_split_heads(x @ blk.wq_s, cfg.n_heads), self.table, self.positions)
        k = apply_rope(_split_heads(x @ blk.wk_s, cfg.n_heads), self.table, self.positions)
        v = _split_heads(x @ blk.wv_s, cfg.n_heads)
        attn = softmax_rows(q @ k.transpose(0, 2, 1) / math.sqrt(cfg.head_dim))
        return _merge_heads(attn @ v) @ blk.wo_s

    def _cross_attention(
        self,
        x: np.ndarray,
        blk: _BlockWeights,
        cond: ConditionSet,
        block_idx: int,
        step_idx: int,
        counters: Counters | None,
    ) -> np.ndarray:
        cfg = self.cfg
        q = _split_heads(x @ blk.wq_c, cfg.n_heads)
        kv = {
            name: (
                _split_heads(group @ blk.wk_c, cfg.n_heads),
                _split_heads(group @ blk.wv_c, cfg.n_heads),
            )
            for name, group in cond.items()
        }
        if counters is not None:
            counters.cross_attention_calls += 1
        if cfg.fusion == "baseline":
            out = baseline_fusion_cross_attention(q, kv)
        else:
            active = cfg.fusion == "kab" and gate_active(
                block_idx, step_idx, cfg.n_steps, cfg.guidance
            )
            if active and counters is not None:
                counters.biased_cross_attention_calls += len(kv)
            out = triple_isolated_cross_attention(q, kv, self.grid.l_q, cfg.guidance, active)
        return _merge_heads(out) @ blk.wo_c

    def sample(
        self,
        first: np.ndarray,
        last: np.ndarray,
        cond: ConditionSet,
        noise_seed: int | None = None,
        counters: Counters | None = None,
    ) -> SampleResult:
        """Deterministic denoising from seeded noise; keyframes re-imposed every step."""
        cfg = self.cfg
        grid = self.grid
        first = np.asarray(first, dtype=np.float64).reshape(grid.l_q, grid.d)
        last = np.asarray(last, dtype=np.float64).reshape(grid.l_q, grid.d)
        if cond.d_ctx != cfg.cond_dim:
            raise ValueError(f"condition d_ctx {cond.d_ctx} != config cond_dim {cfg.cond_dim}")
        counters = counters if counters is not None else Counters()
        mask = np.zeros(grid.f, dtype=np.int8)
        mask[0] = 1
        mask[-1] = 1

        seed = cfg.seed if noise_seed is None else noise_seed
        rng = rng_for(seed, 0x5A3)
        x = np.empty((grid.n_tokens, grid.d), dtype=np.float64)
        x[:] = rng.standard_normal(x.shape)
        x[frame_row_slice(0, grid)] = first
        x[frame_row_slice(grid.f - 1, grid)] = last

        alpha_bar = ALPHA_BAR_MIN + (1.0 - ALPHA_BAR_MIN) * (
            np.arange(cfg.n_steps + 1, dtype=np.float64) / cfg.n_steps
        )
        for step in range(1, cfg.n_steps + 1):
            eps_hat = self.forward(x, mask, cond, step, counters)
            counters.denoiser_calls += 1
            a_prev, a_next = alpha_bar[step - 1], alpha_bar[step]
            x0_hat = (x - math.sqrt(1.0 - a_prev) * eps_hat) / math.sqrt(a_prev)
            x = math.sqrt(a_next) * x0_hat + math.sqrt(1.0 - a_next) * eps_hat
            x[frame_row_slice(0, grid)] = first
            x[frame_row_slice(grid.f - 1, grid)] = last
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("sampler produced non-finite latents")
        return SampleResult(latents=x, counters=counters, grid=grid)


def self_attention(tokens: TokenSequence, table: RopeFrequencyTable, cfg: DitConfig) -> TokenSequence:
    """Standalone rotary self-attention over a token sequence (block-1 weights)."""
    if tokens.grid.d != cfg.hidden_dim:
        raise ValueError(f"token dim {tokens.grid.d} != hidden dim {cfg.hidden_dim}")
    if table.head_dim != cfg.head_dim:
        raise ValueError(f"table head_dim {table.head_dim} != config head_dim {cfg.head_dim}")
    rng = rng_for(cfg.seed, 0xD17)
    blk = _BlockWeights(rng, cfg.hidden_dim, cfg.cond_dim)
    positions = token_positions(tokens.grid)
    q = apply_rope(_split_heads(tokens.values @ blk.wq_s, cfg.n_heads), table, positions)
    k = apply_rope(_split_heads(tokens.values @ blk.wk_s, cfg.n_heads), table, positions)
    v = _split_heads(tokens.values @ blk.wv_s, cfg.n_heads)
    attn = softmax_rows(q @ k.transpose(0, 2, 1) / math.sqrt(cfg.head_dim))
    out = _merge_heads(attn @ v) @ blk.wo_s
    return TokenSequence(values=out, mask=tokens.mask.copy(), grid=tokens.grid)


def dit_forward(
    tokens: TokenSequence,
    cond: ConditionSet,
    cfg: DitConfig,
    step_idx: int,
    counters: Counters | None = None,
) -> np.ndarray:
    """Convenience single-shot denoiser evaluation (weights rebuilt from cfg.seed)."""
    model = Denoiser(cfg, tokens.grid.f)
    return model.forward(tokens.values, tokens.mask, cond, step_idx, counters)


def sample(
    first: np.ndarray,
    last: np.ndarray,
    cond: ConditionSet,
    cfg: DitConfig,
    f: int,
    noise_seed: int | None = None,
) -> SampleResult:
    """Build a denoiser for f latent frames and run one sampling pass."""
    return Denoiser(cfg, f).sample(first, last, cond, noise_seed=noise_seed)


def probe_table(
    f: int,
    l_q: int,
    head_dim: int = 16,
    base: float = 100.0,
) -> RopeFrequencyTable:
    """Default probe table; the low base keeps the temporal frequency ladder
    discriminative across a desk-scale frame range."""
    grid_h, grid_w = _factor_grid(l_q)
    return build_frequency_rows(
        head_dim, default_axis_split(head_dim), base, f=f, grid_h=grid_h, grid_w=grid_w
    )


def _factor_grid(l_q: int) -> tuple[int, int]:
    gh = int(math.isqrt(l_q))
    while l_q % gh != 0:
        gh -= 1
    return gh, l_q // gh


def attention_probe(
    f: int,
    l_q: int,
    table: RopeFrequencyTable,
    retro_cfg: RetroConfig,
    n_seeds: int = 200,
    *,
    window: int = 2,
    sharpness: float = 16.0,
    seed: int = 0,
) -> tuple[AttentionProfile, AttentionProfile]:
    """Content-free probe: (vanilla, rescaled) per-frame attention profiles.

    Each probe seed draws one random unit content vector shared by the query
    and key of every token, so the attention map is a pure function of rotary
    phase differences; ``sharpness`` is the softmax inverse temperature on the
    unit-normalized phase-coherence logits.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    if window < 0:
        raise ValueError(f"window must be >= 0, got {window}")
    if sharpness <= 0:
        raise ValueError(f"sharpness must be > 0, got {sharpness}")
    if table.n_frames != f:
        raise ValueError(f"table covers {table.n_frames} frames, expected {f}")
    grid_h, grid_w = table.omega_h.shape[0], table.omega_w.shape[0]
    if grid_h * grid_w != l_q:
        raise ValueError(f"table spatial extents {grid_h}x{grid_w} != l_q {l_q}")

    grid = FrameGrid(f=f, grid_h=grid_h, grid_w=grid_w, d=table.head_dim)
    positions = token_positions(grid)
    frames = positions[:, 0]
    key_masks = [np.abs(frames - t) <= window for t in range(f)]
    query_masks = [frames == t for t in range(f)]
    scaled = retro_scale(table, retro_cfg, f)

    profiles: list[AttentionProfile] = []
    for tbl in (table, scaled):
        phi = tbl.angles(positions)
        cos, sin = np.cos(phi), np.sin(phi)
        rng = rng_for(seed, 0x9B0)
        local_acc = np.zeros(f)
        entropy_acc = np.zeros(f)
        for _ in range(n_seeds):
            c = rng.standard_normal(table.head_dim)
            c /= np.linalg.norm(c)
            even, odd = c[0::2], c[1::2]
            qk = np.empty((grid.n_tokens, table.head_dim), dtype=np.float64)
            qk[:, 0::2] = even * cos - odd * sin
            qk[:, 1::2] = even * sin + odd * cos
            attn = softmax_rows(sharpness * (qk @ qk.T))
            entropy = -(attn * np.log(attn)).sum(axis=1)
            for t in range(f):
                local_acc[t] += attn[np.ix_(query_masks[t], key_masks[t])].sum(axis=1).mean()
                entropy_acc[t] += entropy[query_masks[t]].mean()
        profiles.append(
            AttentionProfile(
                local_mass=local_acc / n_seeds,
                entropy=entropy_acc / n_seeds,
                window=window,
                n_seeds=n_seeds,
            )
        )

    bound = math.log(grid.n_tokens) + 1e-9
    for prof in profiles:
        if np.any(prof.local_mass < -1e-12) or np.any(prof.local_mass > 1.0 + 1e-9):
            raise FloatingPointError("probe local mass left [0, 1]")
        if np.any(prof.entropy < -1e-12) or np.any(prof.entropy > bound):
            raise FloatingPointError("probe entropy left [0, ln(f*l_q)]")
    return profiles[0], profiles[1]
