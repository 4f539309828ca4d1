"""Conditional latent sequence construction and token layout.

A generation request supplies two keyframes; the model operates on a
frame-major sequence of latent tokens in which frame 0 holds the first
keyframe, frame f-1 holds the last, and every middle frame starts out
zero-filled.  A per-frame binary mask records which frames are keyframes.
All attention-side row slicing assumes the frame-major ordering fixed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import rng_for

TEMPORAL_COMPRESSION = 4  # pixel frames per latent step, mirrors a 4x video VAE stride


@dataclass(frozen=True)
class FrameGrid:
    """Token layout of one latent video: f frames of grid_h x grid_w tokens, d channels."""

    f: int
    grid_h: int
    grid_w: int
    d: int

    def __post_init__(self) -> None:
        if self.f < 2:
            raise ValueError(f"frame count must be >= 2, got {self.f}")
        if self.grid_h < 1 or self.grid_w < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.grid_h}x{self.grid_w}")
        if self.d < 1:
            raise ValueError(f"channel dim must be >= 1, got {self.d}")

    @property
    def l_q(self) -> int:
        """Tokens per frame."""
        return self.grid_h * self.grid_w

    @property
    def n_tokens(self) -> int:
        return self.f * self.l_q


@dataclass
class TokenSequence:
    """Frame-major token values (f*l_q, d) plus a per-frame keyframe mask (f,)."""

    values: np.ndarray
    mask: np.ndarray
    grid: FrameGrid

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.int8)
        if self.values.shape != (self.grid.n_tokens, self.grid.d):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.n_tokens}, {self.grid.d})"
            )
        if self.mask.shape != (self.grid.f,):
            raise ValueError(f"mask shape {self.mask.shape} != ({self.grid.f},)")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ValueError("mask entries must be 0 or 1")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("token values must be finite")


@dataclass
class ConditionSet:
    """The three cross-attention context groups: first image, last image, text.

    Each group is a (l_k, d_ctx) token array with its own key count; all three
    share the context channel dimension.
    """

    first_img: np.ndarray
    last_img: np.ndarray
    text: np.ndarray

    def __post_init__(self) -> None:
        for name, group in self.items():
            arr = np.asarray(group, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ValueError(f"condition '{name}' must be a non-empty (l_k, d_ctx) array")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"condition '{name}' contains non-finite values")
            setattr(self, name, arr)
        dims = {g.shape[1] for _, g in self.items()}
        if len(dims) != 1:
            raise ValueError(f"condition groups disagree on d_ctx: {sorted(dims)}")

    def items(self) -> list[tuple[str, np.ndarray]]:
        """Condition groups in the fixed fusion order."""
        return [("first_img", self.first_img), ("last_img", self.last_img), ("text", self.text)]

    @property
    def d_ctx(self) -> int:
        return self.first_img.shape[1]


def latent_frame_count(F: int) -> int:
    """Latent frame count for a pixel-frame count F.

    F=2 is the degenerate endpoint-only sequence (f=2).  Otherwise F must
    satisfy (F-1) % 4 == 0 and compresses to f = (F-1)/4 + 1.
    """
    if F < 2:
        raise ValueError(f"need at least 2 pixel frames, got {F}")
    if F == 2:
        return 2
    if (F - 1) % TEMPORAL_COMPRESSION != 0:
        raise ValueError(
            f"pixel frame count {F} is not 1 + {TEMPORAL_COMPRESSION}*k; "
            f"supported lengths are 2, 5, 9, 13, ..."
        )
    return (F - 1) // TEMPORAL_COMPRESSION + 1


def pixel_frame_index(t: int, f: int, F: int) -> int:
    """Pixel-frame index aligned with latent frame t (endpoints map to endpoints)."""
    if not 0 <= t < f:
        raise ValueError(f"latent frame {t} out of range [0, {f})")
    return t * (F - 1) // (f - 1)


def assemble_latent_sequence(
    first: np.ndarray, last: np.ndarray, F: int, grid: FrameGrid
) -> TokenSequence:
    """Build the conditional latent sequence from two encoded keyframes.

    ``first`` and ``last`` are latent keyframes of shape (l_q, d) (or
    (grid_h, grid_w, d), which is flattened row-major).  The result places
    ``first`` at latent frame 0, ``last`` at frame f-1, zeros in between, and
    marks exactly those two frames in the mask.  ``grid.f`` must equal the
    latent count implied by F.
    """
    f = latent_frame_count(F)
    if grid.f != f:
        raise ValueError(f"grid.f={grid.f} inconsistent with F={F} (expected f={f})")
    first = _as_latent_frame(first, grid, "first")
    last = _as_latent_frame(last, grid, "last")
    if first.shape != last.shape:
        raise ValueError(f"keyframe shapes differ: {first.shape} vs {last.shape}")

    values = np.zeros((grid.n_tokens, grid.d), dtype=np.float64)
    values[frame_row_slice(0, grid)] = first
    values[frame_row_slice(f - 1, grid)] = last
    mask = np.zeros(f, dtype=np.int8)
    mask[0] = 1
    mask[f - 1] = 1
    return TokenSequence(values=values, mask=mask, grid=grid)


def _as_latent_frame(frame: np.ndarray, grid: FrameGrid, name: str) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape == (grid.grid_h, grid.grid_w, grid.d):
        frame = frame.reshape(grid.l_q, grid.d)
    if frame.shape != (grid.l_q, grid.d):
        raise ValueError(
            f"{name} keyframe shape {frame.shape} does not match grid ({grid.l_q}, {grid.d})"
        )
    if not np.all(np.isfinite(frame)):
        raise ValueError(f"{name} keyframe contains non-finite values")
    return frame


def token_index(t: int, h: int, w: int, grid: FrameGrid) -> int:
    """Flat index of the token at (frame t, row h, col w); frame-major, row-major."""
    if not 0 <= t < grid.f:
        raise ValueError(f"frame index {t} out of range [0, {grid.f})")
    if not 0 <= h < grid.grid_h:
        raise ValueError(f"row index {h} out of range [0, {grid.grid_h})")
    if not 0 <= w < grid.grid_w:
        raise ValueError(f"col index {w} out of range [0, {grid.grid_w})")
    return t * grid.l_q + h * grid.grid_w + w


def frame_row_slice(t: int, grid: FrameGrid) -> slice:
    """Contiguous row range [t*l_q, (t+1)*l_q) of frame t inside flattened tensors."""
    if not 0 <= t < grid.f:
        raise ValueError(f"frame index {t} out of range [0, {grid.f})")
    return slice(t * grid.l_q, (t + 1) * grid.l_q)


def token_positions(grid: FrameGrid) -> np.ndarray:
    """(n_tokens, 3) int array of (t, h, w) per flat token index."""
    t, h, w = np.meshgrid(
        np.arange(grid.f), np.arange(grid.grid_h), np.arange(grid.grid_w), indexing="ij"
    )
    return np.stack([t.ravel(), h.ravel(), w.ravel()], axis=1)


def frame_of_token(grid: FrameGrid) -> np.ndarray:
    """(n_tokens,) frame index per flat token."""
    return np.repeat(np.arange(grid.f), grid.l_q)


def encode_frame(pixels: np.ndarray, grid: FrameGrid, seed: int) -> np.ndarray:
    """Deterministic stand-in encoder: seeded linear projection of a pixel frame.

    Maps an (H, W) or (H, W, C) image to a (l_q, d) latent frame.  The
    projection matrix depends only on (pixel size, grid, seed), so the same
    image always encodes identically.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    flat = pixels.reshape(-1)
    proj = _projection(flat.size, grid, seed)
    return (proj @ flat).reshape(grid.l_q, grid.d)


def decode_frame(latent: np.ndarray, pixel_shape: tuple[int, ...], grid: FrameGrid, seed: int) -> np.ndarray:
    """Pseudo-inverse of :func:`encode_frame`; output clipped to [0, 1]."""
    latent = np.asarray(latent, dtype=np.float64).reshape(-1)
    n_pix = int(np.prod(pixel_shape))
    pixels = _pinv(n_pix, grid, seed) @ latent
    return np.clip(pixels.reshape(pixel_shape), 0.0, 1.0)


_PROJ_CACHE: dict[tuple[int, int, int, int], np.ndarray] = {}
_PINV_CACHE: dict[tuple[int, int, int, int], np.ndarray] = {}


def _cache_key(n_pixels: int, grid: FrameGrid, seed: int) -> tuple[int, int, int, int]:
    return (n_pixels, grid.l_q, grid.d, seed)


def _projection(n_pixels: int, grid: FrameGrid, seed: int) -> np.ndarray:
    key = _cache_key(n_pixels, grid, seed)
    if key not in _PROJ_CACHE:
        rng = rng_for(seed, 0x6E0C0DE, n_pixels, grid.l_q, grid.d)
        _PROJ_CACHE[key] = rng.standard_normal((grid.l_q * grid.d, n_pixels)) / np.sqrt(n_pixels)
    return _PROJ_CACHE[key]


def _pinv(n_pixels: int, grid: FrameGrid, seed: int) -> np.ndarray:
    key = _cache_key(n_pixels, grid, seed)
    if key not in _PINV_CACHE:
        _PINV_CACHE[key] = np.linalg.pinv(_projection(n_pixels, grid, seed))
    return _PINV_CACHE[key]
