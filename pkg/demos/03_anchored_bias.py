"""Trace the anchored attention bias on a toy cross-attention instance.

One head, five frames, one query per frame, three condition keys.  The
first and last frames' attention rows become anchors; every frame gets a
target that interpolates them, and a log-ratio bias nudges its logits
toward that target, strongest near the keyframes.
"""

import numpy as np

from inbetween import (
    GuidanceSchedule,
    apply_kab,
    beta_at,
    frame_mean_attention,
    gate_active,
    interpolate_anchor,
    logit_bias,
    softmax_rows,
)

rng = np.random.default_rng(7)
f, l_q, l_k = 5, 1, 3
logits = rng.standard_normal((1, f * l_q, l_k)) * 2.0
sched = GuidanceSchedule()

plain = softmax_rows(logits)
a0 = frame_mean_attention(plain, 0, l_q)
aF = frame_mean_attention(plain, f - 1, l_q)
print("keyframe anchors over the 3 condition keys:")
print(f"  first: {np.round(a0.probs, 3)}")
print(f"  last:  {np.round(aF.probs, 3)}")

print("\nper-frame target, taper, and bias:")
for t in range(f):
    target = interpolate_anchor(a0, aF, t, f)
    measured = frame_mean_attention(plain, t, l_q)
    bias = logit_bias(target, measured, sched.epsilon)
    print(f"  t={t}: beta={beta_at(t, f, sched):.2f}  target={np.round(target.probs, 3)}"
          f"  bias={np.round(bias, 3)}")

biased = apply_kab(logits, a0, aF, l_q, sched, active=True)
print("\nattention rows before -> after biasing:")
for t in range(f):
    print(f"  t={t}: {np.round(plain[0, t], 3)} -> {np.round(biased[0, t], 3)}")
print("(endpoint rows are unchanged: their target equals their own anchor)")

print("\nlayer/step gate (1-based), 50 total steps:")
for layer, step in [(4, 1), (5, 1), (8, 20), (8, 21), (12, 10), (13, 10)]:
    print(f"  layer {layer:2d}, step {step:2d} -> {'ON' if gate_active(layer, step, 50, sched) else 'off'}")
