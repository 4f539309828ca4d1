import math

import numpy as np
import pytest

from inbetween.kab import (
    CONDITION_NAMES,
    FrameAnchor,
    GuidanceSchedule,
    active_step_count,
    apply_kab,
    baseline_fusion_cross_attention,
    beta_at,
    frame_mean_attention,
    gate_active,
    interpolate_anchor,
    kab_cross_attention,
    logit_bias,
    softmax_rows,
    triple_isolated_cross_attention,
)

from oracles import kab_pipeline

SCHED = GuidanceSchedule()


# ---------------------------------------------------------------- softmax


def test_softmax_constant_row_is_uniform():
    out = softmax_rows(np.full((3, 5), 2.7))
    assert np.allclose(out, 0.2, atol=1e-15)


def test_softmax_two_key_example():
    out = softmax_rows(np.array([[0.0, math.log(2.0)]]))
    assert np.allclose(out, [[1 / 3, 2 / 3]], atol=1e-12)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((4, 6))
    shifted = logits + 123.456
    assert np.allclose(softmax_rows(logits), softmax_rows(shifted), atol=1e-12)


def test_softmax_rejects_non_finite():
    with pytest.raises(ValueError):
        softmax_rows(np.array([[0.0, np.inf]]))
    with pytest.raises(ValueError):
        softmax_rows(np.array([[np.nan, 0.0]]))


def test_softmax_rows_sum_to_one_sweep():
    rng = np.random.default_rng(1)
    attn = softmax_rows(rng.standard_normal((8, 40, 7)) * 10)
    assert np.allclose(attn.sum(axis=-1), 1.0, atol=1e-6)
    assert np.all(attn >= 0)


# ---------------------------------------------------------------- anchors


def test_frame_mean_all_rows_identical():
    v = np.array([0.1, 0.2, 0.7])
    attn = np.tile(v, (2, 6, 1))  # H=2, f=3, l_q=2
    for t in range(3):
        anchor = frame_mean_attention(attn, t, l_q=2)
        assert np.allclose(anchor.probs, v, atol=1e-15)
        assert anchor.frame == t


def test_frame_mean_explicit_hand_average():
    # H=2, l_q=2, l_k=3, single frame: mean over the 4 rows
    rows = np.array(
        [
            [[0.5, 0.3, 0.2], [0.1, 0.1, 0.8]],
            [[0.2, 0.2, 0.6], [0.4, 0.4, 0.2]],
        ]
    )
    hand = np.zeros(3)
    for h in range(2):
        for q in range(2):
            hand += rows[h, q]
    hand /= 4
    anchor = frame_mean_attention(rows, 0, l_q=2)
    assert np.allclose(anchor.probs, hand, atol=1e-12)


def test_frame_mean_sums_to_one_random():
    rng = np.random.default_rng(2)
    attn = softmax_rows(rng.standard_normal((3, 12, 5)))
    for t in range(4):
        anchor = frame_mean_attention(attn, t, l_q=3)
        assert anchor.probs.sum() == pytest.approx(1.0, abs=1e-6)


def test_frame_mean_out_of_range():
    attn = softmax_rows(np.zeros((1, 4, 2)))
    with pytest.raises(ValueError):
        frame_mean_attention(attn, 2, l_q=2)


# ---------------------------------------------------------------- interpolation


def test_interpolate_endpoints_exact():
    rng = np.random.default_rng(3)
    a0 = softmax_rows(rng.standard_normal((1, 4)))[0]
    aF = softmax_rows(rng.standard_normal((1, 4)))[0]
    assert np.array_equal(interpolate_anchor(a0, aF, 0, 9).probs, a0)
    assert np.array_equal(interpolate_anchor(a0, aF, 8, 9).probs, aF)


def test_interpolate_midpoint_is_average():
    a0 = np.array([0.8, 0.2])
    aF = np.array([0.2, 0.8])
    mid = interpolate_anchor(a0, aF, 2, 5)  # odd f: exact midpoint
    assert np.allclose(mid.probs, [0.5, 0.5], atol=1e-15)


def test_interpolate_stays_in_convex_hull_and_sums_to_one():
    rng = np.random.default_rng(4)
    a0 = softmax_rows(rng.standard_normal((1, 6)))[0]
    aF = softmax_rows(rng.standard_normal((1, 6)))[0]
    for t in range(7):
        m = interpolate_anchor(a0, aF, t, 7).probs
        assert m.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(m >= np.minimum(a0, aF) - 1e-12)
        assert np.all(m <= np.maximum(a0, aF) + 1e-12)


def test_interpolate_validation():
    a = np.array([0.5, 0.5])
    with pytest.raises(ValueError):
        interpolate_anchor(a, a, 0, 1)
    with pytest.raises(ValueError):
        interpolate_anchor(a, np.array([1.0]), 0, 3)
    with pytest.raises(ValueError):
        interpolate_anchor(a, a, 3, 3)


# ---------------------------------------------------------------- taper


@pytest.mark.parametrize("f", [5, 21, 41])
def test_beta_taper_endpoints_and_midpoint(f):
    assert beta_at(0, f, SCHED) == pytest.approx(0.7, abs=1e-6)
    assert beta_at(f - 1, f, SCHED) == pytest.approx(0.7, abs=1e-6)
    assert beta_at((f - 1) // 2, f, SCHED) == pytest.approx(0.3, abs=1e-6)


def test_beta_taper_symmetry():
    for f in (6, 9, 21):
        for t in range(f):
            assert beta_at(t, f, SCHED) == pytest.approx(beta_at(f - 1 - t, f, SCHED), abs=1e-12)


def test_beta_bounds():
    for t in range(21):
        b = beta_at(t, 21, SCHED)
        assert 0.3 - 1e-12 <= b <= 0.7 + 1e-12


# ---------------------------------------------------------------- bias


def test_logit_bias_zero_when_anchors_match():
    a = np.array([0.25, 0.5, 0.25])
    assert np.array_equal(logit_bias(a, a, 1e-6), np.zeros(3))


def test_logit_bias_log_ratio_example():
    b = logit_bias(np.array([0.75, 0.25]), np.array([0.25, 0.75]), 1e-6)
    assert b[0] == pytest.approx(math.log(3.0), abs=1e-5)
    assert b[1] == pytest.approx(-math.log(3.0), abs=1e-5)


def test_logit_bias_antisymmetric():
    rng = np.random.default_rng(5)
    m = softmax_rows(rng.standard_normal((1, 5)))[0]
    a = softmax_rows(rng.standard_normal((1, 5)))[0]
    assert np.allclose(logit_bias(m, a, 1e-6), -logit_bias(a, m, 1e-6), atol=1e-12)


def test_logit_bias_validation():
    with pytest.raises(ValueError):
        logit_bias(np.array([0.5, 0.5]), np.array([-0.1, 1.1]), 1e-6)
    with pytest.raises(ValueError):
        logit_bias(np.array([0.5, 0.5]), np.array([0.5, 0.5]), 0.0)


# ---------------------------------------------------------------- gate


def test_gate_examples():
    assert gate_active(5, 1, 50, SCHED) is True
    assert gate_active(4, 1, 50, SCHED) is False
    assert gate_active(12, 1, 50, SCHED) is True
    assert gate_active(13, 1, 50, SCHED) is False
    assert gate_active(8, 20, 50, SCHED) is True
    assert gate_active(8, 21, 50, SCHED) is False


def test_active_step_count_snaps_float_noise():
    assert active_step_count(50, 0.4) == 20
    assert active_step_count(3, 0.4) == 2  # ceil(1.2)
    assert active_step_count(1, 0.4) == 1
    assert active_step_count(10, 1.0) == 10
    assert active_step_count(7, 0.5) == 4  # ceil(3.5)


def test_gate_validation():
    with pytest.raises(ValueError):
        gate_active(0, 1, 50, SCHED)
    with pytest.raises(ValueError):
        gate_active(5, 0, 50, SCHED)
    with pytest.raises(ValueError):
        active_step_count(0, 0.4)


def test_guidance_schedule_validation():
    with pytest.raises(ValueError):
        GuidanceSchedule(beta_min=0.8, beta_max=0.7)
    with pytest.raises(ValueError):
        GuidanceSchedule(layer_lo=9, layer_hi=5)
    with pytest.raises(ValueError):
        GuidanceSchedule(step_fraction=0.0)
    with pytest.raises(ValueError):
        GuidanceSchedule(epsilon=0.0)


# ---------------------------------------------------------------- apply_kab


def _random_instance(rng, heads, f, l_q, l_k, scale=3.0):
    return rng.standard_normal((heads, f * l_q, l_k)) * scale


def _anchors_of(logits, l_q):
    plain = softmax_rows(logits)
    f = logits.shape[1] // l_q
    return (
        frame_mean_attention(plain, 0, l_q),
        frame_mean_attention(plain, f - 1, l_q),
    )


def test_apply_kab_inactive_is_plain_softmax_bitwise():
    rng = np.random.default_rng(6)
    logits = _random_instance(rng, 2, 3, 2, 4)
    a0, aF = _anchors_of(logits, 2)
    out = apply_kab(logits, a0, aF, 2, SCHED, active=False)
    assert np.array_equal(out, softmax_rows(logits))


def test_apply_kab_zero_beta_matches_plain():
    rng = np.random.default_rng(7)
    logits = _random_instance(rng, 2, 4, 2, 3)
    a0, aF = _anchors_of(logits, 2)
    sched = GuidanceSchedule(beta_min=0.0, beta_max=0.0)
    out = apply_kab(logits, a0, aF, 2, sched, active=True)
    assert np.allclose(out, softmax_rows(logits), atol=1e-12)


def test_apply_kab_hand_traced_instance():
    # H=1, f=3, l_q=1, l_k=2: check against the straight-line scalar pipeline
    logits = np.array([[[0.2, -0.4], [1.0, 0.3], [-0.7, 0.5]]])
    a0, aF = _anchors_of(logits, 1)
    out = apply_kab(logits, a0, aF, 1, SCHED, active=True)
    expected = kab_pipeline(logits.tolist(), 1, 0.3, 0.7, 1e-6)
    assert np.allclose(out, expected, atol=1e-12)


def test_apply_kab_matches_scalar_oracle_randomized():
    rng = np.random.default_rng(8)
    for _ in range(25):
        heads = int(rng.integers(1, 3))
        f = int(rng.integers(2, 5))
        l_q = int(rng.integers(1, 4))
        l_k = int(rng.integers(2, 5))
        logits = _random_instance(rng, heads, f, l_q, l_k)
        a0, aF = _anchors_of(logits, l_q)
        out = apply_kab(logits, a0, aF, l_q, SCHED, active=True)
        expected = np.array(kab_pipeline(logits.tolist(), l_q, 0.3, 0.7, 1e-6))
        assert np.max(np.abs(out - expected)) < 1e-9


def test_apply_kab_rows_renormalized():
    rng = np.random.default_rng(9)
    logits = _random_instance(rng, 3, 5, 3, 6, scale=8.0)
    a0, aF = _anchors_of(logits, 3)
    out = apply_kab(logits, a0, aF, 3, SCHED, active=True)
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-6)


def test_apply_kab_endpoint_bias_vanishes():
    # anchors from the same map make the endpoint bias zero
    rng = np.random.default_rng(10)
    logits = _random_instance(rng, 2, 4, 2, 3)
    a0, aF = _anchors_of(logits, 2)
    out = apply_kab(logits, a0, aF, 2, SCHED, active=True)
    plain = softmax_rows(logits)
    assert np.allclose(out[:, :2, :], plain[:, :2, :], atol=1e-12)
    assert np.allclose(out[:, -2:, :], plain[:, -2:, :], atol=1e-12)


def test_apply_kab_bias_identical_within_frame_and_across_heads():
    rng = np.random.default_rng(11)
    logits = _random_instance(rng, 2, 3, 3, 4)
    a0, aF = _anchors_of(logits, 3)
    out = apply_kab(logits, a0, aF, 3, SCHED, active=True)

    # swapping two query rows of the same frame commutes with the bias
    swapped = logits.copy()
    swapped[:, [3, 5], :] = swapped[:, [5, 3], :]  # rows 0 and 2 of frame 1
    out_swapped = apply_kab(swapped, a0, aF, 3, SCHED, active=True)
    expected = out.copy()
    expected[:, [3, 5], :] = expected[:, [5, 3], :]
    assert np.allclose(out_swapped, expected, atol=1e-12)

    # a duplicated head receives the identical bias
    dup = np.concatenate([logits, logits[:1]], axis=0)
    da0, daF = _anchors_of(dup, 3)
    out_dup = apply_kab(dup, da0, daF, 3, SCHED, active=True)
    assert np.allclose(out_dup[0], out_dup[2], atol=1e-15)


def test_apply_kab_monotone_pull_on_two_keys():
    # increasing beta strictly increases mass on the key favored by the target
    logits = np.array([[[0.3, -0.2], [0.4, 0.1], [-0.5, 0.2]]])  # f=3, l_q=1, l_k=2
    a0 = np.array([0.9, 0.1])
    aF = np.array([0.8, 0.2])
    masses = []
    for beta in (0.0, 0.2, 0.4, 0.8, 1.6):
        sched = GuidanceSchedule(beta_min=beta, beta_max=beta)
        out = apply_kab(logits, a0, aF, 1, sched, active=True)
        masses.append(out[0, 1, 0])  # middle frame, favored key 0
    for lo, hi in zip(masses, masses[1:]):
        assert hi > lo


def test_apply_kab_anchor_length_mismatch():
    logits = np.zeros((1, 4, 3))
    with pytest.raises(ValueError):
        apply_kab(logits, np.array([0.5, 0.5]), np.array([0.5, 0.5]), 2, SCHED, active=True)


# ---------------------------------------------------------------- fusion


def _toy_qkv(rng, heads=2, f=3, l_q=2, d_h=4, l_ks=(3, 4, 5)):
    q = rng.standard_normal((heads, f * l_q, d_h))
    kv = {}
    for name, l_k in zip(CONDITION_NAMES, l_ks):
        kv[name] = (
            rng.standard_normal((heads, l_k, d_h)),
            rng.standard_normal((heads, l_k, d_h)),
        )
    return q, kv


def test_triple_identical_conditions_equals_single():
    rng = np.random.default_rng(12)
    q = rng.standard_normal((2, 6, 4))
    k = rng.standard_normal((2, 3, 4))
    v = rng.standard_normal((2, 3, 4))
    kv = {name: (k, v) for name in CONDITION_NAMES}
    out = triple_isolated_cross_attention(q, kv, 2, SCHED, active=True)
    single = kab_cross_attention(q, k, v, 2, SCHED, active=True)
    assert np.allclose(out, single, atol=1e-6)


def test_gate_off_single_condition_is_vanilla_attention():
    rng = np.random.default_rng(13)
    q = rng.standard_normal((1, 4, 4))
    k = rng.standard_normal((1, 3, 4))
    v = rng.standard_normal((1, 3, 4))
    out = kab_cross_attention(q, k, v, 2, SCHED, active=False)
    expected = softmax_rows(q @ k.transpose(0, 2, 1) / 2.0) @ v
    assert np.array_equal(out, expected)


def test_triple_equals_three_independent_passes():
    rng = np.random.default_rng(14)
    q, kv = _toy_qkv(rng)
    out = triple_isolated_cross_attention(q, kv, 2, SCHED, active=True)
    parts = [
        kab_cross_attention(q, kv[name][0], kv[name][1], 2, SCHED, active=True)
        for name in CONDITION_NAMES
    ]
    assert np.allclose(out, (parts[0] + parts[1] + parts[2]) / 3.0, atol=1e-12)


def test_triple_missing_or_empty_condition():
    rng = np.random.default_rng(15)
    q, kv = _toy_qkv(rng)
    del kv["text"]
    with pytest.raises(ValueError):
        triple_isolated_cross_attention(q, kv, 2, SCHED, active=True)
    q, kv = _toy_qkv(rng)
    kv["text"] = (np.zeros((2, 0, 4)), np.zeros((2, 0, 4)))
    with pytest.raises(ValueError):
        triple_isolated_cross_attention(q, kv, 2, SCHED, active=False)


def test_baseline_fusion_two_branch_average():
    rng = np.random.default_rng(16)
    q, kv = _toy_qkv(rng)
    out = baseline_fusion_cross_attention(q, kv)
    k1, v1 = kv["first_img"]
    k2 = np.concatenate([kv["last_img"][0], kv["text"][0]], axis=1)
    v2 = np.concatenate([kv["last_img"][1], kv["text"][1]], axis=1)
    b1 = softmax_rows(q @ k1.transpose(0, 2, 1) / 2.0) @ v1
    b2 = softmax_rows(q @ k2.transpose(0, 2, 1) / 2.0) @ v2
    assert np.allclose(out, (b1 + b2) / 2.0, atol=1e-15)


def test_frame_anchor_validation():
    with pytest.raises(ValueError):
        FrameAnchor(probs=np.array([0.5, 0.6]), frame=0)
    with pytest.raises(ValueError):
        FrameAnchor(probs=np.array([-0.1, 1.1]), frame=0)
