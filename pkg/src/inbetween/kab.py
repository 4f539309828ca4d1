"""Keyframe-anchored attention bias for cross-attention.

The two keyframes' cross-attention rows are compressed into per-condition
"anchor" distributions over the condition keys.  Linearly interpolating the
two anchors gives every frame a target distribution; the gap between a
frame's measured mean attention and its target, in log space, becomes a small
logit bias broadcast to all heads and all of that frame's query rows.  The
bias strength tapers with a cosine over the timeline (strong near keyframes,
weak in the middle) and is gated to a band of layers and the early fraction
of denoising steps.

Three condition groups (first image, last image, text) are attended in
isolation, each steered by its own anchors, and averaged with equal weight.
A reference "baseline fusion" is also provided: the first image attended
alone, the last image and text concatenated into one joint group, no bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONDITION_NAMES = ("first_img", "last_img", "text")


@dataclass(frozen=True)
class GuidanceSchedule:
    """Bias taper endpoints, gated layer band, gated step fraction, and log epsilon."""

    beta_min: float = 0.3
    beta_max: float = 0.7
    layer_lo: int = 5
    layer_hi: int = 12
    step_fraction: float = 0.4
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta_min <= self.beta_max:
            raise ValueError(f"need 0 <= beta_min <= beta_max, got ({self.beta_min}, {self.beta_max})")
        if not 1 <= self.layer_lo <= self.layer_hi:
            raise ValueError(f"need 1 <= layer_lo <= layer_hi, got ({self.layer_lo}, {self.layer_hi})")
        if not 0.0 < self.step_fraction <= 1.0:
            raise ValueError(f"step_fraction must be in (0, 1], got {self.step_fraction}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass
class FrameAnchor:
    """Mean attention distribution over condition keys for one frame."""

    probs: np.ndarray
    frame: int

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1:
            raise ValueError("anchor must be a 1-d probability vector")
        if np.any(self.probs < 0):
            raise ValueError("anchor entries must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-6:
            raise ValueError(f"anchor must sum to 1, got {self.probs.sum()!r}")


def _probs(anchor: FrameAnchor | np.ndarray) -> np.ndarray:
    if isinstance(anchor, FrameAnchor):
        return anchor.probs
    return np.asarray(anchor, dtype=np.float64)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def frame_mean_attention(attn: np.ndarray, t: int, l_q: int) -> FrameAnchor:
    """Anchor of frame t: mean of its l_q query rows over all heads.

    ``attn`` is a normalized attention map of shape (H, f*l_q, l_k) or
    (f*l_q, l_k).
    """
    attn = np.asarray(attn, dtype=np.float64)
    if attn.ndim == 2:
        attn = attn[None]
    heads, rows, l_k = attn.shape
    if rows % l_q != 0:
        raise ValueError(f"row count {rows} not divisible by l_q={l_q}")
    f = rows // l_q
    if not 0 <= t < f:
        raise ValueError(f"frame index {t} out of range [0, {f})")
    block = attn[:, t * l_q : (t + 1) * l_q, :]
    return FrameAnchor(probs=block.mean(axis=(0, 1)), frame=t)


def interpolate_anchor(
    a0: FrameAnchor | np.ndarray, aF: FrameAnchor | np.ndarray, t: int, f: int
) -> FrameAnchor:
    """Target anchor at frame t: convex blend of the two keyframe anchors.

    The blend weight is tau = t / (f-1), so t=0 returns the first anchor
    exactly and t=f-1 the last.
    """
    if f < 2:
        raise ValueError(f"frame count must be >= 2, got {f}")
    if not 0 <= t <= f - 1:
        raise ValueError(f"frame index {t} out of range [0, {f - 1}]")
    p0, pF = _probs(a0), _probs(aF)
    if p0.shape != pF.shape:
        raise ValueError(f"anchor lengths differ: {p0.shape} vs {pF.shape}")
    tau = t / (f - 1)
    return FrameAnchor(probs=(1.0 - tau) * p0 + tau * pF, frame=t)


def beta_at(t: int, f: int, schedule: GuidanceSchedule) -> float:
    """Cosine-tapered bias strength: beta_max at both keyframes, beta_min at the midpoint."""
    if f < 2:
        raise ValueError(f"frame count must be >= 2, got {f}")
    if not 0 <= t <= f - 1:
        raise ValueError(f"frame index {t} out of range [0, {f - 1}]")
    tau = t / (f - 1)
    return schedule.beta_min + (schedule.beta_max - schedule.beta_min) * (
        1.0 + math.cos(2.0 * math.pi * tau)
    ) / 2.0


def logit_bias(
    target: FrameAnchor | np.ndarray, measured: FrameAnchor | np.ndarray, epsilon: float
) -> np.ndarray:
    """Log-ratio bias log(target + eps) - log(measured + eps), one entry per key."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    m, a = _probs(target), _probs(measured)
    if m.shape != a.shape:
        raise ValueError(f"anchor lengths differ: {m.shape} vs {a.shape}")
    if np.any(m < 0) or np.any(a < 0):
        raise ValueError("anchor entries must be nonnegative")
    return np.log(m + epsilon) - np.log(a + epsilon)


def active_step_count(total_steps: int, step_fraction: float) -> int:
    """Number of leading denoising steps inside the gate: ceil(fraction * total).

    Products that are integers up to float noise snap to that integer so that
    e.g. 0.4 * 50 counts as exactly 20 steps.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    product = step_fraction * total_steps
    nearest = round(product)
    if abs(product - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(product))


def gate_active(layer_idx: int, step_idx: int, total_steps: int, schedule: GuidanceSchedule) -> bool:
    """Whether the bias is applied at a given (1-based) layer and denoising step."""
    if layer_idx < 1 or step_idx < 1:
        raise ValueError("layer_idx and step_idx are 1-based and must be >= 1")
    in_layers = schedule.layer_lo <= layer_idx <= schedule.layer_hi
    in_steps = step_idx <= active_step_count(total_steps, schedule.step_fraction)
    return in_layers and in_steps


def apply_kab(
    logits: np.ndarray,
    anchor_first: FrameAnchor | np.ndarray,
    anchor_last: FrameAnchor | np.ndarray,
    l_q: int,
    schedule: GuidanceSchedule,
    active: bool = True,
) -> np.ndarray:
    """Bias cross-attention logits toward per-frame target anchors and renormalize.

    ``logits`` covers all frames, shape (H, f*l_q, l_k) with the 1/sqrt(d_h)
    scale already applied.  For frame t the bias beta(t) * (log(M+eps) -
    log(Abar_t+eps)) is added to every head and every query row of that frame,
    where M interpolates the supplied keyframe anchors and Abar_t is this
    map's own frame-t mean.  With ``active=False`` the plain softmax of the
    input logits is returned unchanged.
    """
    logits = np.asarray(logits, dtype=np.float64)
    squeeze = logits.ndim == 2
    if squeeze:
        logits = logits[None]
    if logits.ndim != 3:
        raise ValueError(f"logits must be (H, f*l_q, l_k), got shape {logits.shape}")
    attn = softmax_rows(logits)
    if not active:
        return attn[0] if squeeze else attn

    heads, rows, l_k = logits.shape
    if rows % l_q != 0:
        raise ValueError(f"row count {rows} not divisible by l_q={l_q}")
    f = rows // l_q
    a0, aF = _probs(anchor_first), _probs(anchor_last)
    if a0.shape != (l_k,) or aF.shape != (l_k,):
        raise ValueError(
            f"anchor length must match key count {l_k}, got {a0.shape} and {aF.shape}"
        )

    tau = np.arange(f, dtype=np.float64) / (f - 1) if f > 1 else np.zeros(1)
    measured = attn.reshape(heads, f, l_q, l_k).mean(axis=(0, 2))  # (f, l_k)
    targets = (1.0 - tau)[:, None] * a0[None, :] + tau[:, None] * aF[None, :]
    eps = schedule.epsilon
    bias = np.log(targets + eps) - np.log(measured + eps)  # (f, l_k)
    beta = schedule.beta_min + (schedule.beta_max - schedule.beta_min) * (
        1.0 + np.cos(2.0 * np.pi * tau)
    ) / 2.0

    biased = logits.reshape(heads, f, l_q, l_k) + (beta[:, None] * bias)[None, :, None, :]
    out = softmax_rows(biased.reshape(heads, rows, l_k))
    return out[0] if squeeze else out


def kab_cross_attention(
    q: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    l_q: int,
    schedule: GuidanceSchedule,
    active: bool,
) -> np.ndarray:
    """One condition's cross-attention with anchors taken from its own map.

    q: (H, f*l_q, d_h); keys/values: (H, l_k, d_h).  Returns (H, f*l_q, d_h).
    """
    d_h = q.shape[-1]
    logits = q @ keys.transpose(0, 2, 1) / math.sqrt(d_h)
    if active:
        plain = softmax_rows(logits)
        f = logits.shape[1] // l_q
        a0 = frame_mean_attention(plain, 0, l_q)
        aF = frame_mean_attention(plain, f - 1, l_q)
        attn = apply_kab(logits, a0, aF, l_q, schedule, active=True)
    else:
        attn = softmax_rows(logits)
    return attn @ values


def triple_isolated_cross_attention(
    q: np.ndarray,
    condition_kv: dict[str, tuple[np.ndarray, np.ndarray]],
    l_q: int,
    schedule: GuidanceSchedule,
    active: bool,
) -> np.ndarray:
    """Attend the three condition groups in isolation and average equally.

    ``condition_kv`` maps each name in CONDITION_NAMES to per-head (keys,
    values) of shape (H, l_k_c, d_h).  Each group is refined by its own
    anchors and taper; the outputs are summed in the fixed condition order
    and divided by three.
    """
    missing = [n for n in CONDITION_NAMES if n not in condition_kv]
    if missing:
        raise ValueError(f"missing condition groups: {missing}")
    out = np.zeros_like(q, dtype=np.float64)
    for name in CONDITION_NAMES:
        keys, values = condition_kv[name]
        if keys.shape[1] < 1:
            raise ValueError(f"condition '{name}' has no key tokens")
        out = out + kab_cross_attention(q, keys, values, l_q, schedule, active)
    return out / len(CONDITION_NAMES)


def baseline_fusion_cross_attention(
    q: np.ndarray,
    condition_kv: dict[str, tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Reference asymmetric fusion: first image alone, last image and text joint.

    No bias is applied in this mode; the two branch outputs are averaged.
    """
    missing = [n for n in CONDITION_NAMES if n not in condition_kv]
    if missing:
        raise ValueError(f"missing condition groups: {missing}")
    d_h = q.shape[-1]
    k_first, v_first = condition_kv["first_img"]
    k_joint = np.concatenate([condition_kv["last_img"][0], condition_kv["text"][0]], axis=1)
    v_joint = np.concatenate([condition_kv["last_img"][1], condition_kv["text"][1]], axis=1)
    out_first = softmax_rows(q @ k_first.transpose(0, 2, 1) / math.sqrt(d_h)) @ v_first
    out_joint = softmax_rows(q @ k_joint.transpose(0, 2, 1) / math.sqrt(d_h)) @ v_joint
    return (out_first + out_joint) / 2.0
