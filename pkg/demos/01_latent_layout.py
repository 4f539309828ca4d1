"""Walk through the conditional latent sequence and its token layout.

A generation request starts from two keyframes.  The latent video places the
first keyframe at frame 0, the last at frame f-1, zeros everywhere between,
and carries a per-frame keyframe mask.  Attention code addresses frames
through contiguous row slices of the flattened token tensor, so the
frame-major ordering shown here is load-bearing.
"""

import numpy as np

from inbetween import (
    FrameGrid,
    assemble_latent_sequence,
    encode_frame,
    frame_row_slice,
    latent_frame_count,
    token_index,
)

# 9 pixel frames compress to 3 latent frames (stride-4 temporal compression)
F = 9
f = latent_frame_count(F)
print(f"pixel frames F={F} -> latent frames f={f}")

grid = FrameGrid(f=f, grid_h=2, grid_w=2, d=6)
print(f"grid: {grid.grid_h}x{grid.grid_w} tokens/frame, {grid.d} channels, "
      f"{grid.n_tokens} tokens total")

# "encode" two tiny images with the seeded projection stand-in
rng = np.random.default_rng(0)
first_img = rng.uniform(0, 1, (8, 8))
last_img = rng.uniform(0, 1, (8, 8))
first = encode_frame(first_img, grid, seed=0)
last = encode_frame(last_img, grid, seed=0)

seq = assemble_latent_sequence(first, last, F, grid)
print(f"\nmask (1 = keyframe): {list(seq.mask)}")
for t in range(f):
    rows = frame_row_slice(t, grid)
    frame_norm = np.linalg.norm(seq.values[rows])
    print(f"frame {t}: rows [{rows.start:2d}, {rows.stop:2d})  |values| = {frame_norm:.3f}")

print("\nmiddle frames are exactly zero before noise injection:",
      bool(np.all(seq.values[frame_row_slice(1, grid)] == 0.0)))

print("\nflat index of (frame, row, col):")
for t, h, w in [(0, 0, 0), (1, 0, 1), (2, 1, 1)]:
    print(f"  ({t}, {h}, {w}) -> {token_index(t, h, w, grid)}")
