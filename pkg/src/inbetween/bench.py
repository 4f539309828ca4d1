"""Benchmark orchestration: manifests, fixture-backed runs, and JSON reports.

Manifests are JSON Lines: one entry object per line with exactly the keys
id, frames_path, prompt, challenge, F.  Frames load from a .npy tensor
(little-endian float, shape header) or from a directory of lossless images.
Reports are versioned JSON, deterministic byte-for-byte for a fixed seed
except for the wall_time_s field.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .config import ProbeConfig, RunConfig
from .dit import Counters, Denoiser, DitConfig, attention_probe, probe_table
from .errors import ConfigError, ManifestError
from .fixtures import CHALLENGES
from .kab import active_step_count
from .latent import (
    ConditionSet,
    FrameGrid,
    decode_frame,
    encode_frame,
    frame_row_slice,
    latent_frame_count,
    pixel_frame_index,
)
from .metrics import (
    adjacent_consistency,
    as_video,
    centroid_track,
    pace_stability,
    psnr,
    ssim,
)
from .rope import IDENTITY_RETRO, edge_mid_sets
from .seeding import rng_for

SCHEMA_VERSION = 1
MANIFEST_KEYS = {"id", "frames_path", "prompt", "challenge", "F"}

# Table-4-style ablation grid: (label, kab on, retro on)
ABLATION_CELLS = (
    ("baseline", False, False),
    ("kab_only", True, False),
    ("retro_only", False, True),
    ("kab_retro", True, True),
)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    frames_path: str
    prompt: str
    challenge: str
    F: int


def subsample_indices(F: int, stride: int) -> list[int]:
    """Frame indices {0, stride, 2*stride, ...} plus the final frame, deduplicated."""
    if F < 2:
        raise ValueError(f"need F >= 2, got {F}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return sorted(set(range(0, F, stride)) | {F - 1})


def parse_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read and validate a JSONL manifest."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}:{lineno}: entry must be an object")
        missing = MANIFEST_KEYS - raw.keys()
        extra = raw.keys() - MANIFEST_KEYS
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing keys {sorted(missing)}")
        if extra:
            raise ManifestError(f"{path}:{lineno}: unknown keys {sorted(extra)}")
        for key in ("id", "frames_path", "prompt", "challenge"):
            if not isinstance(raw[key], str):
                raise ManifestError(f"{path}:{lineno}: {key} must be a string")
        if isinstance(raw["F"], bool) or not isinstance(raw["F"], int) or raw["F"] < 2:
            raise ManifestError(f"{path}:{lineno}: F must be an integer >= 2")
        if raw["challenge"] not in CHALLENGES:
            raise ManifestError(
                f"{path}:{lineno}: challenge {raw['challenge']!r} not in {CHALLENGES}"
            )
        if raw["id"] in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate id {raw['id']!r}")
        seen.add(raw["id"])
        entries.append(ManifestEntry(**raw))
    return entries


def serialize_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(
                json.dumps(
                    {
                        "id": e.id,
                        "frames_path": e.frames_path,
                        "prompt": e.prompt,
                        "challenge": e.challenge,
                        "F": e.F,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


_IMAGE_SUFFIXES = (".png", ".bmp", ".tif", ".tiff")


def load_frames(frames_path: str | Path, base_dir: str | Path | None = None) -> np.ndarray:
    """Load a video as (F, H, W[, C]) floats in [0, 1] from .npy or an image directory."""
    path = Path(frames_path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        if path.is_dir():
            files = sorted(p for p in path.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
            if not files:
                raise ManifestError(f"no lossless image files found in {path}")
            from PIL import Image

            frames = [np.asarray(Image.open(p), dtype=np.float64) / 255.0 for p in files]
            video = np.stack(frames)
        else:
            video = np.load(path)
    except ManifestError:
        raise
    except Exception as exc:
        raise ManifestError(f"cannot load frames from {path}: {exc}") from exc
    try:
        return as_video(video, str(path))
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc


def condition_embeddings(
    prompt: str,
    first_px: np.ndarray,
    last_px: np.ndarray,
    cond_dim: int,
    seed: int,
    n_text: int = 8,
    n_img: int = 4,
) -> ConditionSet:
    """Deterministic stand-in context tokens for the three condition groups."""
    text_rng = rng_for(seed, 0x7E87, zlib.crc32(prompt.encode()))
    text = text_rng.standard_normal((n_text, cond_dim))

    flat_first = np.asarray(first_px, dtype=np.float64).reshape(-1)
    flat_last = np.asarray(last_px, dtype=np.float64).reshape(-1)
    proj_rng = rng_for(seed, 0xC11F, flat_first.size)
    proj = proj_rng.standard_normal((n_img * cond_dim, flat_first.size)) / math.sqrt(
        flat_first.size
    )
    return ConditionSet(
        first_img=(proj @ flat_first).reshape(n_img, cond_dim),
        last_img=(proj @ flat_last).reshape(n_img, cond_dim),
        text=text,
    )


def _entry_noise_seed(seed: int, entry_id: str) -> int:
    return zlib.crc32(f"{seed}:{entry_id}".encode())


def run_entry(entry: ManifestEntry, frames: np.ndarray, cfg: DitConfig, seed: int) -> dict[str, Any]:
    """Sample one manifest entry and evaluate the decoded result against its source."""
    F = frames.shape[0]
    if F != entry.F:
        raise ManifestError(f"entry {entry.id}: manifest says F={entry.F}, file has {F} frames")
    try:
        f = latent_frame_count(F)
    except ValueError as exc:
        raise ManifestError(f"entry {entry.id}: {exc}") from exc

    grid = FrameGrid(f=f, grid_h=cfg.grid_h, grid_w=cfg.grid_w, d=cfg.hidden_dim)
    first_lat = encode_frame(frames[0], grid, seed)
    last_lat = encode_frame(frames[-1], grid, seed)
    cond = condition_embeddings(entry.prompt, frames[0], frames[-1], cfg.cond_dim, seed)

    model = Denoiser(cfg, f)
    result = model.sample(first_lat, last_lat, cond, noise_seed=_entry_noise_seed(seed, entry.id))

    generated = np.stack(
        [
            decode_frame(result.latents[frame_row_slice(t, grid)], frames.shape[1:], grid, seed)
            for t in range(f)
        ]
    )
    reference = frames[[pixel_frame_index(t, f, F) for t in range(f)]]

    psnr_res = psnr(generated, reference)
    ssim_res = ssim(generated, reference)
    adjacent = adjacent_consistency(generated)
    try:
        pace = pace_stability(centroid_track(generated))
        pace_std, pace_cv = pace.pace_std, pace.pace_cv
    except ValueError:
        pace_std, pace_cv = float("nan"), float("nan")

    return {
        "id": entry.id,
        "challenge": entry.challenge,
        "F": entry.F,
        "f": f,
        "metrics": {
            "psnr_mean": psnr_res.mean,
            "psnr_per_frame": psnr_res.per_frame,
            "ssim_mean": ssim_res.mean,
            "ssim_per_frame": ssim_res.per_frame,
            "adjacent_cosine": adjacent.mean_cosine,
            "adjacent_mse": adjacent.mean_mse,
            "pace_std": pace_std,
            "pace_cv": pace_cv,
        },
        "counters": result.counters.as_dict(),
    }


def resolve_dit_config(
    cfg: RunConfig,
    seed: int | None = None,
    fusion: str = "kab",
    retro_enabled: bool = True,
) -> DitConfig:
    """Apply CLI-level flags (seed, fusion mode, rescaling toggle) to the file config."""
    return replace(
        cfg.dit,
        fusion=fusion,
        retro=cfg.dit.retro if retro_enabled else None,
        seed=cfg.dit.seed if seed is None else seed,
    )


def _run_entries(
    entries: list[ManifestEntry], base_dir: Path, cfg: DitConfig, seed: int
) -> list[dict[str, Any]]:
    payloads = []
    for entry in sorted(entries, key=lambda e: e.id):
        frames = load_frames(entry.frames_path, base_dir)
        payloads.append(run_entry(entry, frames, cfg, seed))
    return payloads


def run_generate(
    manifest_path: str | Path,
    cfg: RunConfig,
    seed: int | None = None,
    fusion: str = "kab",
    retro_enabled: bool = True,
) -> dict[str, Any]:
    """Sample every manifest entry under one flag setting and report metrics."""
    t0 = time.perf_counter()
    entries = parse_manifest(manifest_path)
    base_dir = Path(manifest_path).parent
    dit_cfg = resolve_dit_config(cfg, seed, fusion, retro_enabled)
    payloads = _run_entries(entries, base_dir, dit_cfg, dit_cfg.seed)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "generate",
        "config": cfg.as_dict(),
        "flags": {"fusion": fusion, "retro_enabled": retro_enabled},
        "seed": dit_cfg.seed,
        "entries": payloads,
        "expected_biased_calls_per_run": _expected_biased_calls(dit_cfg, fusion),
        "wall_time_s": time.perf_counter() - t0,
    }


def _expected_biased_calls(cfg: DitConfig, fusion: str) -> int:
    if fusion != "kab":
        return 0
    gated_layers = max(0, min(cfg.guidance.layer_hi, cfg.n_blocks) - cfg.guidance.layer_lo + 1)
    return gated_layers * active_step_count(cfg.n_steps, cfg.guidance.step_fraction) * 3


def run_ablate(
    manifest_path: str | Path, cfg: RunConfig, seed: int | None = None
) -> dict[str, Any]:
    """2x2 ablation grid over (bias on/off) x (rescaling on/off) with a shared seed."""
    t0 = time.perf_counter()
    entries = parse_manifest(manifest_path)
    base_dir = Path(manifest_path).parent
    cells = []
    for label, kab_on, retro_on in ABLATION_CELLS:
        dit_cfg = resolve_dit_config(cfg, seed, "kab" if kab_on else "triple", retro_on)
        cells.append(
            {
                "label": label,
                "kab": kab_on,
                "retro": retro_on,
                "entries": _run_entries(entries, base_dir, dit_cfg, dit_cfg.seed),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "ablate",
        "config": cfg.as_dict(),
        "seed": cfg.dit.seed if seed is None else seed,
        "cells": cells,
        "wall_time_s": time.perf_counter() - t0,
    }


def run_probe(cfg: RunConfig) -> dict[str, Any]:
    """Vanilla-vs-rescaled probe profiles with per-frame differences and a sign summary."""
    t0 = time.perf_counter()
    pc = cfg.probe
    retro = cfg.dit.retro if cfg.dit.retro is not None else IDENTITY_RETRO
    table = probe_table(pc.f, pc.l_q, pc.head_dim, pc.base)
    vanilla, rescaled = attention_probe(
        pc.f,
        pc.l_q,
        table,
        retro,
        pc.n_seeds,
        window=pc.window,
        sharpness=pc.sharpness,
        seed=pc.seed,
    )
    w_edge = retro.resolved_w_edge(pc.f)
    edge, mid = edge_mid_sets(pc.f, w_edge)
    edge_idx, mid_idx = sorted(edge), sorted(mid)

    def frame_mean(values: np.ndarray, idx: list[int]) -> float:
        return float(values[idx].mean()) if idx else float("nan")

    edge_local = {
        "vanilla": frame_mean(vanilla.local_mass, edge_idx),
        "retro": frame_mean(rescaled.local_mass, edge_idx),
    }
    mid_entropy = {
        "vanilla": frame_mean(vanilla.entropy, mid_idx),
        "retro": frame_mean(rescaled.entropy, mid_idx),
    }
    d_local = edge_local["retro"] - edge_local["vanilla"]
    d_entropy = mid_entropy["retro"] - mid_entropy["vanilla"]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "probe",
        "config": cfg.as_dict(),
        "f": pc.f,
        "l_q": pc.l_q,
        "w_edge": w_edge,
        "n_seeds": pc.n_seeds,
        "window": pc.window,
        "profiles": {
            "vanilla": {"local_mass": vanilla.local_mass, "entropy": vanilla.entropy},
            "retro": {"local_mass": rescaled.local_mass, "entropy": rescaled.entropy},
        },
        "delta": {
            "local_mass": rescaled.local_mass - vanilla.local_mass,
            "entropy": rescaled.entropy - vanilla.entropy,
            "edge_local_mass": d_local,
            "mid_entropy": d_entropy,
        },
        "summary": {
            "edge_local_mass": edge_local,
            "mid_entropy": mid_entropy,
            "edge_local_mass_increases": bool(d_local > 0),
            "mid_entropy_increases": bool(d_entropy > 0),
        },
        "wall_time_s": time.perf_counter() - t0,
    }


def run_metrics(
    video_path: str | Path,
    reference_path: str | Path | None = None,
    threshold: float = 0.0,
    pace_stride: int = 1,
) -> dict[str, Any]:
    """Stand-alone metric evaluation of one video (optionally against a reference)."""
    t0 = time.perf_counter()
    video = load_frames(video_path)
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": "metrics",
        "video": str(video_path),
        "frames": int(video.shape[0]),
    }
    if reference_path is not None:
        reference = load_frames(reference_path)
        psnr_res = psnr(video, reference)
        ssim_res = ssim(video, reference)
        report["reference"] = str(reference_path)
        report["psnr_mean"] = psnr_res.mean
        report["psnr_per_frame"] = psnr_res.per_frame
        report["ssim_mean"] = ssim_res.mean
        report["ssim_per_frame"] = ssim_res.per_frame
    adjacent = adjacent_consistency(video)
    report["adjacent_cosine"] = adjacent.mean_cosine
    report["adjacent_mse"] = adjacent.mean_mse
    idx = subsample_indices(video.shape[0], pace_stride)
    try:
        track = centroid_track(video, threshold)[idx]
        pace = pace_stability(track)
        report["pace_track_indices"] = idx
        report["pace_displacements"] = pace.displacements
        report["pace_std"] = pace.pace_std
        report["pace_cv"] = pace.pace_cv
    except ValueError as exc:
        report["pace_error"] = str(exc)
    report["wall_time_s"] = time.perf_counter() - t0
    return report


def sanitize(obj: Any) -> Any:
    """Make a report JSON-safe: arrays to lists, non-finite floats to sentinels."""
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def report_json(report: dict[str, Any]) -> str:
    return json.dumps(sanitize(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict[str, Any], out_dir: str | Path, name: str = "report.json") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(report_json(report), encoding="utf-8")
    return path
