"""Multi-axis rotary position tables and per-frame temporal rescaling.

Queries and keys are rotated pairwise by angles that concatenate a temporal
row, a height row, and a width row.  The inbetweening-specific twist is a
per-frame rescaling of the temporal row only: frames near the two keyframes
rotate faster (scale > 1, sharpening attention locally) while middle frames
rotate slower (scale < 1, widening their temporal receptive field).  Spatial
rows are never touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class RetroConfig:
    """Temporal rescaling schedule.

    ``s_edge`` applies to ``w_edge`` frames at each end of the sequence,
    ``s_mid`` to everything in between.  ``w_edge=None`` selects the automatic
    width round(0.1 * f).  The identity configuration (1, 1) is permitted and
    reproduces plain rotary embeddings bit for bit.
    """

    s_edge: float = 1.06
    s_mid: float = 0.94
    w_edge: int | None = None

    def __post_init__(self) -> None:
        identity = self.s_edge == 1.0 and self.s_mid == 1.0
        if not identity and not (self.s_edge > 1.0 and 0.0 < self.s_mid < 1.0):
            raise ValueError(
                f"require s_edge > 1 > s_mid > 0 (or the identity 1, 1); "
                f"got s_edge={self.s_edge}, s_mid={self.s_mid}"
            )
        if self.w_edge is not None and self.w_edge < 0:
            raise ValueError(f"w_edge must be >= 0, got {self.w_edge}")

    def resolved_w_edge(self, f: int) -> int:
        if self.w_edge is None:
            return compute_w_edge(f)
        if self.w_edge > f // 2:
            raise ValueError(f"w_edge={self.w_edge} exceeds floor(f/2)={f // 2}")
        return self.w_edge


IDENTITY_RETRO = RetroConfig(s_edge=1.0, s_mid=1.0, w_edge=0)


@dataclass(frozen=True)
class RopeFrequencyTable:
    """Materialized per-axis angle rows.

    ``omega_t[t, j] = t * theta_t[j]`` before any rescaling, and analogously
    for the spatial rows.  A token at (t, h, w) rotates channel pair p by the
    p-th entry of ``concat(omega_t[t], omega_h[h], omega_w[w])``.
    """

    omega_t: np.ndarray  # (f, d_t)
    omega_h: np.ndarray  # (grid_h, d_h)
    omega_w: np.ndarray  # (grid_w, d_w)

    @property
    def n_frames(self) -> int:
        return self.omega_t.shape[0]

    @property
    def axis_split(self) -> tuple[int, int, int]:
        return (self.omega_t.shape[1], self.omega_h.shape[1], self.omega_w.shape[1])

    @property
    def n_pairs(self) -> int:
        return sum(self.axis_split)

    @property
    def head_dim(self) -> int:
        return 2 * self.n_pairs

    def angles(self, positions: np.ndarray) -> np.ndarray:
        """(n_tokens, n_pairs) rotation angles for (t, h, w) position triples."""
        positions = np.asarray(positions)
        return np.concatenate(
            [
                self.omega_t[positions[:, 0]],
                self.omega_h[positions[:, 1]],
                self.omega_w[positions[:, 2]],
            ],
            axis=1,
        )


def axis_frequencies(d_axis: int, base: float) -> np.ndarray:
    """Base frequencies theta_j = base**(-j / d_axis), j = 0..d_axis-1."""
    if d_axis == 0:
        return np.zeros(0, dtype=np.float64)
    return base ** (-np.arange(d_axis, dtype=np.float64) / d_axis)


def default_axis_split(head_dim: int) -> tuple[int, int, int]:
    """Split head_dim/2 channel pairs roughly 2:1:1 over (t, h, w)."""
    pairs = head_dim // 2
    d_t = pairs - 2 * (pairs // 4)
    d_h = pairs // 4
    return (d_t, d_h, pairs - d_t - d_h)


def build_frequency_rows(
    head_dim: int,
    axis_split: tuple[int, int, int],
    base: float = 10000.0,
    *,
    f: int,
    grid_h: int,
    grid_w: int,
) -> RopeFrequencyTable:
    """Materialize angle rows for all frames and spatial positions.

    ``axis_split`` gives the channel-pair count per axis and must sum to
    head_dim/2.  Position p on an axis yields angle p * theta_j on that
    axis's j-th pair.
    """
    if head_dim % 2 != 0 or head_dim < 2:
        raise ValueError(f"head_dim must be even and >= 2, got {head_dim}")
    if any(d < 0 for d in axis_split) or sum(axis_split) != head_dim // 2:
        raise ValueError(f"axis split {axis_split} must be nonnegative and sum to {head_dim // 2}")
    if f < 1 or grid_h < 1 or grid_w < 1:
        raise ValueError(f"extents must be positive, got f={f}, grid={grid_h}x{grid_w}")
    d_t, d_h, d_w = axis_split
    return RopeFrequencyTable(
        omega_t=np.arange(f, dtype=np.float64)[:, None] * axis_frequencies(d_t, base)[None, :],
        omega_h=np.arange(grid_h, dtype=np.float64)[:, None] * axis_frequencies(d_h, base)[None, :],
        omega_w=np.arange(grid_w, dtype=np.float64)[:, None] * axis_frequencies(d_w, base)[None, :],
    )


def compute_w_edge(f: int) -> int:
    """Edge width per side: round(0.1 * f), half away from zero, clamped to [0, f//2]."""
    if f < 2:
        raise ValueError(f"frame count must be >= 2, got {f}")
    w = int(math.floor(0.1 * f + 0.5))
    return max(0, min(w, f // 2))


def edge_mid_sets(f: int, w_edge: int) -> tuple[frozenset[int], frozenset[int]]:
    """Symmetric edge/middle frame index sets; their disjoint union is {0..f-1}."""
    if not 0 <= w_edge <= f // 2:
        raise ValueError(f"w_edge={w_edge} out of range [0, {f // 2}]")
    edge = frozenset(range(w_edge)) | frozenset(range(f - w_edge, f))
    mid = frozenset(range(w_edge, f - w_edge))
    return frozenset(edge), mid


def scale_factors(f: int, cfg: RetroConfig) -> np.ndarray:
    """(f,) per-frame temporal scale s(t)."""
    w_edge = cfg.resolved_w_edge(f)
    edge, _ = edge_mid_sets(f, w_edge)
    s = np.full(f, cfg.s_mid, dtype=np.float64)
    for t in edge:
        s[t] = cfg.s_edge
    return s


def retro_scale(table: RopeFrequencyTable, cfg: RetroConfig, f: int) -> RopeFrequencyTable:
    """Rescale the temporal angle rows frame-wise; spatial rows pass through untouched."""
    if table.n_frames != f:
        raise ValueError(f"table covers {table.n_frames} frames, expected {f}")
    s = scale_factors(f, cfg)
    return replace(table, omega_t=table.omega_t * s[:, None])


def apply_rope(x: np.ndarray, table: RopeFrequencyTable, positions: np.ndarray) -> np.ndarray:
    """Rotate consecutive channel pairs of x by the per-token axis angles.

    x has shape (..., n_tokens, head_dim); ``positions`` is one (t, h, w)
    triple per token.  Pair (2j, 2j+1) rotates counterclockwise:
    (x, y) -> (x cos - y sin, x sin + y cos).  Applied identically to queries
    and keys.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != table.head_dim:
        raise ValueError(f"last dim {x.shape[-1]} != head_dim {table.head_dim}")
    positions = np.asarray(positions)
    if positions.ndim != 2 or positions.shape != (x.shape[-2], 3):
        raise ValueError(
            f"positions shape {positions.shape} must be ({x.shape[-2]}, 3)"
        )
    phi = table.angles(positions)
    cos, sin = np.cos(phi), np.sin(phi)
    even, odd = x[..., 0::2], x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out
