"""Show the per-frame temporal rescaling of rotary angles.

Rotary tables hold one angle row per frame; the rescaling multiplies only
the temporal rows, by s_edge near the two keyframes and s_mid in the middle.
Spatial rows never change, so within-frame geometry is untouched.
"""

import numpy as np

from inbetween import (
    RetroConfig,
    build_frequency_rows,
    compute_w_edge,
    edge_mid_sets,
    retro_scale,
)

f = 21
w = compute_w_edge(f)
edge, mid = edge_mid_sets(f, w)
print(f"f={f}: edge width per side = {w}")
print(f"edge frames: {sorted(edge)}")
print(f"mid frames:  {sorted(mid)}")

table = build_frequency_rows(16, (4, 2, 2), f=f, grid_h=2, grid_w=2)
scaled = retro_scale(table, RetroConfig(s_edge=1.06, s_mid=0.94), f)

print("\nper-frame ratio of scaled to vanilla temporal angle (first channel pair):")
for t in range(1, f):
    ratio = scaled.omega_t[t, 0] / table.omega_t[t, 0]
    tag = "edge" if t in edge else "mid"
    marker = "#" * int(round(ratio * 50))
    print(f"  t={t:2d} [{tag:4s}] ratio={ratio:.4f} {marker}")

print("\nspatial rows are bit-identical:",
      bool(np.array_equal(scaled.omega_h, table.omega_h)
           and np.array_equal(scaled.omega_w, table.omega_w)))

print("identity config is a bitwise no-op:",
      bool(np.array_equal(retro_scale(table, RetroConfig(1.0, 1.0), f).omega_t, table.omega_t)))
