"""Independent straight-line reference implementations used as test oracles.

Everything here is written with pure-Python floats and explicit loops, no
numpy, so the production vectorized paths are checked against genuinely
separate arithmetic.
"""

from __future__ import annotations

import math


def softmax_row(row: list[float]) -> list[float]:
    m = max(row)
    exps = [math.exp(v - m) for v in row]
    total = sum(exps)
    return [v / total for v in exps]


def kab_pipeline(
    logits: list[list[list[float]]],
    l_q: int,
    beta_min: float,
    beta_max: float,
    epsilon: float,
) -> list[list[list[float]]]:
    """Full anchored-bias pipeline on nested lists: softmax, per-frame mean
    anchors, endpoint interpolation, log-ratio bias with cosine taper,
    re-softmax."""
    n_heads = len(logits)
    n_rows = len(logits[0])
    l_k = len(logits[0][0])
    f = n_rows // l_q
    attn = [[softmax_row(row) for row in head] for head in logits]

    def frame_mean(t: int) -> list[float]:
        acc = [0.0] * l_k
        for h in range(n_heads):
            for q in range(l_q):
                row = attn[h][t * l_q + q]
                for k in range(l_k):
                    acc[k] += row[k]
        return [v / (n_heads * l_q) for v in acc]

    a_first = frame_mean(0)
    a_last = frame_mean(f - 1)
    out = []
    for h in range(n_heads):
        rows = []
        for r in range(n_rows):
            t = r // l_q
            tau = t / (f - 1)
            beta = beta_min + (beta_max - beta_min) * (1.0 + math.cos(2.0 * math.pi * tau)) / 2.0
            measured = frame_mean(t)
            target = [(1.0 - tau) * a_first[k] + tau * a_last[k] for k in range(l_k)]
            bias = [
                math.log(target[k] + epsilon) - math.log(measured[k] + epsilon)
                for k in range(l_k)
            ]
            rows.append(softmax_row([logits[h][r][k] + beta * bias[k] for k in range(l_k)]))
        out.append(rows)
    return out


def rotate_pairs(vec: list[float], angles: list[float]) -> list[float]:
    """Counterclockwise rotation of consecutive channel pairs by given angles."""
    out = list(vec)
    for j, phi in enumerate(angles):
        x, y = vec[2 * j], vec[2 * j + 1]
        out[2 * j] = x * math.cos(phi) - y * math.sin(phi)
        out[2 * j + 1] = x * math.sin(phi) + y * math.cos(phi)
    return out


def dot(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))
