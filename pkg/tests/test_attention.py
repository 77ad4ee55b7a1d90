"""Deformable attention function and the base-offset injection operator."""

import numpy as np
import pytest

from helpers import deform_attention_oracle, rand_tensor
from vdeblur.attention import (deform_attn_core, deformable_attention, phi,
                               reference_points)
from vdeblur.gradcheck import assert_gradients_close
from vdeblur.ops import softmax
from vdeblur.tensor import Tensor, weighted_sum


def _identity_proj(c):
    return Tensor(np.eye(c)), Tensor(np.zeros(c))


def test_reference_points_layout():
    ref = reference_points(2, 2, 3, dtype=np.float64)
    assert ref.shape == (12, 2)
    np.testing.assert_array_equal(ref[0], [0, 0])
    np.testing.assert_array_equal(ref[1], [1, 0])   # x fastest
    np.testing.assert_array_equal(ref[3], [0, 1])
    np.testing.assert_array_equal(ref[6], [0, 0])   # second frame restarts


# -- phi ---------------------------------------------------------------------

def _uniform_weights(q, m, t, k, dtype=np.float64):
    return Tensor(np.full((q, m, t, k), 1.0 / (t * k), dtype=dtype))


def test_phi_zero_base_is_identity():
    rng = np.random.default_rng(0)
    h = w = 3
    offsets = Tensor(rng.normal(size=(3 * h * w, 2, 3, 2, 2)))
    zero = Tensor(np.zeros((2, h, w)))
    base = [[None, zero, zero], [zero, None, zero], [zero, zero, None]]
    out = phi(offsets, base, query_frames=(0, 1, 2))
    np.testing.assert_array_equal(out.data, offsets.data)


def test_phi_adds_to_matching_slots_only():
    h = w = 2
    q = 3 * h * w
    offsets = Tensor(np.zeros((q, 1, 3, 2, 2)))
    const = np.zeros((2, h, w))
    const[0], const[1] = 2.0, -1.0
    zero = Tensor(np.zeros((2, h, w)))
    base = [
        [None, zero, zero],
        [zero, None, Tensor(const)],   # mid -> next only
        [zero, zero, None],
    ]
    out = phi(offsets, base, query_frames=(0, 1, 2)).data
    mid = out[h * w:2 * h * w]
    np.testing.assert_allclose(mid[:, :, 2, :, 0], 2.0)
    np.testing.assert_allclose(mid[:, :, 2, :, 1], -1.0)
    mid_rest = mid[:, :, :2]
    np.testing.assert_array_equal(mid_rest, np.zeros_like(mid_rest))
    np.testing.assert_array_equal(out[:h * w], 0.0)
    np.testing.assert_array_equal(out[2 * h * w:], 0.0)


def test_phi_missing_offdiagonal_flow_raises():
    offsets = Tensor(np.zeros((12, 1, 3, 1, 2)))
    zero = Tensor(np.zeros((2, 2, 2)))
    base = [[None, None, zero], [zero, None, zero], [zero, zero, None]]
    with pytest.raises(ValueError, match="missing base flow"):
        phi(offsets, base, query_frames=(0, 1, 2))


# -- attention core ---------------------------------------------------------------

def test_single_point_identity():
    rng = np.random.default_rng(1)
    h = w = 3
    c = 4
    values = Tensor(rng.normal(size=(1, c, h, w)))
    q = h * w
    offsets = Tensor(np.zeros((q, 1, 1, 1, 2)))
    weights = Tensor(np.ones((q, 1, 1, 1)))
    out_w, out_b = _identity_proj(c)
    out = deformable_attention(weights, offsets, values, out_w, out_b)
    expected = values.data[0].reshape(c, q).T
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_uniform_attention_averages_frames():
    rng = np.random.default_rng(2)
    t, c, h, w = 3, 4, 2, 3
    values = Tensor(rng.normal(size=(t, c, h, w)))
    q = t * h * w
    k = 2
    offsets = Tensor(np.zeros((q, 1, t, k, 2)))
    weights = _uniform_weights(q, 1, t, k)
    out_w, out_b = _identity_proj(c)
    out = deformable_attention(weights, offsets, values, out_w, out_b)
    mean_map = values.data.mean(axis=0).reshape(c, h * w).T  # [HW,C]
    expected = np.tile(mean_map, (t, 1))
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_core_matches_nested_loop_oracle():
    rng = np.random.default_rng(3)
    for _ in range(25):
        t = 3
        h = int(rng.integers(2, 5))
        w = int(rng.integers(2, 5))
        m = int(rng.choice([1, 2]))
        cm = int(rng.integers(1, 5))
        c = m * cm
        k = int(rng.integers(1, 4))
        n_qf = int(rng.choice([1, t]))
        q = n_qf * h * w
        values = Tensor(rng.normal(size=(t, c, h, w)))
        positions = Tensor(rng.uniform(-1.5, max(h, w) + 0.5, size=(q, m, t, k, 2)))
        weights = Tensor(rng.random(size=(q, m, t, k)))
        out = deform_attn_core(values, positions, weights, m).data
        want = deform_attention_oracle(values.data, positions.data, weights.data, m)
        np.testing.assert_allclose(out, want, atol=1e-6)


def test_permutation_equivariance_over_sampling_points():
    rng = np.random.default_rng(4)
    t, m, k, c, h, w = 3, 2, 4, 6, 3, 3
    q = h * w
    values = Tensor(rng.normal(size=(t, c, h, w)))
    logits = rng.normal(size=(q, m, t, k))
    offsets = rng.normal(scale=0.7, size=(q, m, t, k, 2))
    perm = rng.permutation(k)
    out_w, out_b = _identity_proj(c)

    a1 = softmax(Tensor(logits), axes=(2, 3))
    o1 = deformable_attention(a1, Tensor(offsets), values, out_w, out_b).data
    a2 = softmax(Tensor(logits[:, :, :, perm]), axes=(2, 3))
    o2 = deformable_attention(a2, Tensor(offsets[:, :, :, perm]), values, out_w, out_b).data
    np.testing.assert_allclose(o1, o2, atol=1e-12)


def test_k1_degenerates_to_temporal_attention():
    # with K=1 and integer sampling points, each (head, frame) contributes a
    # single value: features elsewhere must not influence the output
    rng = np.random.default_rng(5)
    t, m, c, h, w = 3, 2, 4, 3, 3
    q = h * w
    base = rng.normal(size=(t, c, h, w))
    offsets = Tensor(np.zeros((q, m, t, 1, 2)))
    weights = Tensor(rng.dirichlet(np.ones(t), size=(q, m)).reshape(q, m, t, 1))
    out_w, out_b = _identity_proj(c)
    ref = deformable_attention(weights, offsets, Tensor(base), out_w, out_b).data

    poked = base.copy()
    poked[:, :, 1, 2] += 5.0    # some pixel
    got = deformable_attention(weights, offsets, Tensor(poked), out_w, out_b).data
    changed = np.zeros(q, dtype=bool)
    changed[1 * w + 2] = True   # only the query sitting on the poked pixel
    np.testing.assert_allclose(got[~changed], ref[~changed], atol=1e-12)
    assert np.abs(got[changed] - ref[changed]).max() > 1.0


def test_value_scaling_scales_output():
    rng = np.random.default_rng(6)
    t, m, k, c, h, w = 3, 2, 3, 4, 3, 4
    q = h * w
    values = rng.normal(size=(t, c, h, w))
    positions = Tensor(rng.uniform(0, 2.5, size=(q, m, t, k, 2)))
    weights = Tensor(rng.random(size=(q, m, t, k)))
    out1 = deform_attn_core(Tensor(values), positions, weights, m).data
    out2 = deform_attn_core(Tensor(3.5 * values), positions, weights, m).data
    np.testing.assert_allclose(out2, 3.5 * out1, atol=1e-9)


def test_normalization_violation_raises():
    rng = np.random.default_rng(7)
    values = Tensor(rng.normal(size=(3, 4, 2, 2)))
    offsets = Tensor(np.zeros((4, 1, 3, 1, 2)))
    bad = Tensor(np.full((4, 1, 3, 1), 0.5))  # sums to 1.5
    out_w, out_b = _identity_proj(4)
    with pytest.raises(ValueError, match="not normalized"):
        deformable_attention(bad, offsets, values, out_w, out_b)


def test_attention_finite_differences_all_inputs():
    rng = np.random.default_rng(8)
    t, m, k, c, h, w = 3, 2, 2, 4, 3, 3
    q = t * h * w
    values = rand_tensor(rng, (t, c, h, w))
    logits = rand_tensor(rng, (q, m, t, k), scale=0.5)
    offsets = Tensor(rng.uniform(-0.8, 0.8, size=(q, m, t, k, 2)) + 0.13,
                     requires_grad=True)
    out_w = rand_tensor(rng, (c, c), scale=0.4)
    out_b = rand_tensor(rng, (c,), scale=0.1)
    proj = rng.normal(size=(q, c))

    def f():
        attn = softmax(logits, axes=(2, 3))
        return weighted_sum(deformable_attention(attn, offsets, values, out_w, out_b), proj)

    assert_gradients_close(f, [values, logits, offsets, out_w, out_b],
                           max_elements=40, rng=rng)
