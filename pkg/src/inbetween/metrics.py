"""Desk-scale video evaluation: PSNR, SSIM, adjacent-frame consistency, pace stability.

Videos are (F, H, W) or (F, H, W, C) float arrays in [0, 1].  Pace stability
quantifies motion regularity: track the intensity centroid per frame, take
consecutive displacement magnitudes, and report their population standard
deviation (and its mean-normalized form).  A perfectly even motion has zero
pace deviation; stop-and-go motion scores high.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 7
SSIM_SIGMA = 1.5


@dataclass
class PsnrResult:
    per_frame: np.ndarray  # dB, +inf where frames are identical
    mean: float


@dataclass
class SsimResult:
    per_frame: np.ndarray
    mean: float


@dataclass
class AdjacentReport:
    """Similarity of consecutive frames; cosine is NaN where a frame is all zero."""

    cosine: np.ndarray  # (F-1,)
    mse: np.ndarray  # (F-1,)
    mean_cosine: float
    mean_mse: float


@dataclass
class PaceReport:
    displacements: np.ndarray  # (n_points - 1,)
    pace_std: float
    pace_cv: float  # std / mean, NaN when the mean displacement is zero


def as_video(v: np.ndarray, name: str = "video") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim not in (3, 4):
        raise ValueError(f"{name} must be (F, H, W) or (F, H, W, C), got shape {v.shape}")
    if v.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 frames, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    if v.min() < 0.0 or v.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1], got range [{v.min()}, {v.max()}]")
    return v


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_video(a, "a"), as_video(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> PsnrResult:
    """Per-frame 10*log10(1/MSE) in dB against a [0, 1] peak; identical frames give +inf."""
    a, b = _check_same_shape(a, b)
    diff = (a - b).reshape(a.shape[0], -1)
    mse = np.mean(diff * diff, axis=1)
    per_frame = np.where(mse > 0.0, 10.0 * np.log10(1.0 / np.maximum(mse, 1e-300)), np.inf)
    return PsnrResult(per_frame=per_frame, mean=float(per_frame.mean()))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, kernel: np.ndarray, c1: float, c2: float) -> float:
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_y = convolve2d(y, kernel, mode="valid")
    var_x = convolve2d(x * x, kernel, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, kernel, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, kernel, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
) -> SsimResult:
    """Gaussian-window structural similarity per frame, averaged over valid windows."""
    a, b = _check_same_shape(a, b)
    if window > min(a.shape[1], a.shape[2]):
        raise ValueError(f"window {window} exceeds frame size {a.shape[1]}x{a.shape[2]}")
    kernel = _gaussian_kernel(window, sigma)
    c1, c2 = (k1 * 1.0) ** 2, (k2 * 1.0) ** 2
    scores = np.empty(a.shape[0], dtype=np.float64)
    for t in range(a.shape[0]):
        fa, fb = a[t], b[t]
        if fa.ndim == 2:
            scores[t] = _ssim_plane(fa, fb, kernel, c1, c2)
        else:
            scores[t] = float(
                np.mean(
                    [_ssim_plane(fa[..., c], fb[..., c], kernel, c1, c2) for c in range(fa.shape[-1])]
                )
            )
    return SsimResult(per_frame=scores, mean=float(scores.mean()))


def adjacent_consistency(v: np.ndarray) -> AdjacentReport:
    """Cosine similarity and MSE between each pair of consecutive flattened frames."""
    v = as_video(v)
    flat = v.reshape(v.shape[0], -1)
    n_pairs = v.shape[0] - 1
    cosine = np.empty(n_pairs, dtype=np.float64)
    mse = np.empty(n_pairs, dtype=np.float64)
    for t in range(n_pairs):
        x, y = flat[t], flat[t + 1]
        if np.array_equal(x, y):
            cosine[t] = np.nan if not x.any() else 1.0
        else:
            nx, ny = np.linalg.norm(x), np.linalg.norm(y)
            cosine[t] = np.nan if nx == 0.0 or ny == 0.0 else float(x @ y / (nx * ny))
        d = x - y
        mse[t] = float(np.mean(d * d))
    mean_cos = float(np.nanmean(cosine)) if np.any(~np.isnan(cosine)) else float("nan")
    return AdjacentReport(
        cosine=cosine, mse=mse, mean_cosine=mean_cos, mean_mse=float(mse.mean())
    )


def centroid_track(v: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """Per-frame intensity-weighted centroid, (F, 2) as (row, col).

    Pixels at or below ``threshold`` carry no weight; a frame with no mass
    above the threshold is an error.
    """
    v = as_video(v)
    intensity = v if v.ndim == 3 else v.mean(axis=-1)
    rows = np.arange(intensity.shape[1], dtype=np.float64)
    cols = np.arange(intensity.shape[2], dtype=np.float64)
    track = np.empty((intensity.shape[0], 2), dtype=np.float64)
    for t in range(intensity.shape[0]):
        w = np.where(intensity[t] > threshold, intensity[t], 0.0)
        total = w.sum()
        if total <= 0.0:
            raise ValueError(f"frame {t} has no mass above threshold {threshold}")
        track[t, 0] = float((w.sum(axis=1) @ rows) / total)
        track[t, 1] = float((w.sum(axis=0) @ cols) / total)
    return track


def pace_stability(track: np.ndarray) -> PaceReport:
    """Regularity of per-step motion along a centroid track of >= 3 points."""
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2 or track.shape[0] < 3:
        raise ValueError(f"track must be (n >= 3, dims), got shape {track.shape}")
    steps = np.diff(track, axis=0)
    displacements = np.sqrt((steps * steps).sum(axis=1))
    std = float(displacements.std())  # population std
    mean = float(displacements.mean())
    cv = float("nan") if mean == 0.0 else std / mean
    return PaceReport(displacements=displacements, pace_std=std, pace_cv=cv)
