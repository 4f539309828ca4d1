"""Seed plumbing shared by every stochastic component."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def seed_sequence(*entries: int) -> np.random.SeedSequence:
    """SeedSequence over arbitrary ints (negatives are masked to 64 bits)."""
    return np.random.SeedSequence([int(e) & _MASK for e in entries])


def rng_for(*entries: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(*entries))
