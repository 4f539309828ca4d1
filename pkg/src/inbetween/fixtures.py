"""Synthetic moving-shape videos, one generator per benchmark challenge.

Each fixture is a bright Gaussian blob on a black background whose motion
pattern matches the challenge label: straight drift, orbiting swing, a
temporary occluder, or near-standstill jitter.  They are small enough to run
through the full pipeline in seconds while giving the metrics real structure
to measure.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .seeding import rng_for

CHALLENGES = ("dynamic_motion", "linear_motion", "occlusion", "near_static")

_PROMPTS = {
    "dynamic_motion": "bright spot swings around the center",
    "linear_motion": "bright spot glides toward the corner",
    "occlusion": "bar crosses in front of the bright spot",
    "near_static": "bright spot rests near the center",
}


def _blob(size: int, cy: float, cx: float, sigma: float, amp: float = 1.0) -> np.ndarray:
    r = np.arange(size, dtype=np.float64)
    dy = (r[:, None] - cy) ** 2
    dx = (r[None, :] - cx) ** 2
    return amp * np.exp(-(dy + dx) / (2.0 * sigma * sigma))


def make_fixture(challenge: str, F: int, size: int = 32, seed: int = 0) -> np.ndarray:
    """(F, size, size) float video in [0, 1] for one challenge category."""
    if challenge not in CHALLENGES:
        raise ValueError(f"unknown challenge {challenge!r}, expected one of {CHALLENGES}")
    if F < 2:
        raise ValueError(f"need at least 2 frames, got {F}")
    rng = rng_for(seed, zlib.crc32(challenge.encode()))
    sigma = size / 10.0
    frames = np.zeros((F, size, size), dtype=np.float64)
    center = (size - 1) / 2.0
    for t in range(F):
        u = t / (F - 1)
        if challenge == "linear_motion":
            cy = size * 0.25 + u * size * 0.5
            cx = size * 0.2 + u * size * 0.6
            frames[t] = _blob(size, cy, cx, sigma)
        elif challenge == "dynamic_motion":
            angle = 2.0 * np.pi * u
            cy = center + size * 0.25 * np.sin(angle)
            cx = center + size * 0.25 * np.cos(angle)
            frames[t] = _blob(size, cy, cx, sigma)
        elif challenge == "occlusion":
            cy = center
            cx = size * 0.2 + u * size * 0.6
            frame = _blob(size, cy, cx, sigma)
            if 0.35 <= u <= 0.65:
                bar_lo = int(size * 0.45)
                bar_hi = int(size * 0.6)
                frame[:, bar_lo:bar_hi] = 0.9
            frames[t] = frame
        else:  # near_static
            cy = center + rng.uniform(-0.5, 0.5)
            cx = center + rng.uniform(-0.5, 0.5)
            frames[t] = _blob(size, cy, cx, sigma)
    return np.clip(frames, 0.0, 1.0)


def fixture_prompt(challenge: str) -> str:
    return _PROMPTS[challenge]


def write_fixture_set(out_dir: str | Path, F: int = 25, size: int = 32, seed: int = 0) -> Path:
    """Write one fixture video per challenge plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    videos = out / "videos"
    videos.mkdir(parents=True, exist_ok=True)
    entries = []
    for challenge in CHALLENGES:
        video = make_fixture(challenge, F, size, seed)
        rel = f"videos/{challenge}_{F:03d}.npy"
        np.save(out / rel, video)
        entries.append(
            {
                "id": f"{challenge}_{F:03d}",
                "frames_path": rel,
                "prompt": fixture_prompt(challenge),
                "challenge": challenge,
                "F": F,
            }
        )
    manifest = out / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return manifest
