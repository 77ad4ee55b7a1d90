"""Encoder, motion estimator, decoder and the assembled networks."""

import numpy as np
import pytest

from helpers import model_to_float64, randomize_params, rand_tensor
from vdeblur.gradcheck import assert_gradients_close
from vdeblur.losses import mse_loss, total_loss, warp_loss
from vdeblur.network import (CascadedDeblurNet, DeblurNet, FeatureExtractor,
                             MotionEstimator, NetworkConfig, Reconstructor)
from vdeblur.optim import Adam
from vdeblur.tensor import Tensor, stack, weighted_sum
from vdeblur.warp import resize_bilinear


def _cfg(**kw):
    base = dict(channels=8, heads=2, points=2, res_blocks=1)
    base.update(kw)
    return NetworkConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(channels=6)           # not divisible by 4
    with pytest.raises(ValueError):
        NetworkConfig(channels=16, heads=3)  # not divisible by heads
    with pytest.raises(ValueError):
        NetworkConfig(frames=5)


def test_encoder_shape_and_weight_sharing():
    rng = np.random.default_rng(0)
    enc = FeatureExtractor(NetworkConfig(channels=32), rng)
    frames = np.random.default_rng(1).random((3, 3, 64, 64), dtype=np.float32)
    frames[1] = frames[0]
    out = enc(Tensor(frames))
    assert out.shape == (3, 32, 16, 16)
    np.testing.assert_array_equal(out.data[0], out.data[1])  # same weights, same input


def test_encoder_rejects_indivisible_dims():
    rng = np.random.default_rng(0)
    enc = FeatureExtractor(_cfg(), rng)
    with pytest.raises(ValueError):
        enc(Tensor(np.zeros((1, 3, 30, 32), dtype=np.float32)))


def test_encoder_gradients():
    rng = np.random.default_rng(2)
    enc = FeatureExtractor(_cfg(), rng, dtype=np.float64)
    randomize_params(enc, rng, scale=0.2)
    frames = rand_tensor(rng, (1, 3, 8, 8), scale=0.5)
    proj = rng.normal(size=(1, 8, 2, 2))
    assert_gradients_close(lambda: weighted_sum(enc(frames), proj),
                           list(enc.params()) + [frames], max_elements=5, rng=rng)


def test_motion_estimator_zero_init_gives_zero_flows():
    rng = np.random.default_rng(3)
    me = MotionEstimator(_cfg(channels=16), rng)
    feats = [Tensor(np.random.default_rng(4).random((16, 6, 6), dtype=np.float32))
             for _ in range(3)]
    flows = me(feats)
    for f in flows.all():
        assert f.shape == (2, 6, 6)
        np.testing.assert_array_equal(f.data, 0.0)


def test_decoder_shape_and_residual_identity():
    rng = np.random.default_rng(5)
    cfg = _cfg(channels=16)
    dec = Reconstructor(cfg, rng)
    blurry = Tensor(np.random.default_rng(6).random((3, 64, 64), dtype=np.float32))
    out = dec(Tensor(np.zeros((16, 16, 16), dtype=np.float32)), blurry)
    assert out.shape == (3, 64, 64)
    # zero fused features + zero-initialized final conv: exact pass-through
    np.testing.assert_array_equal(out.data, blurry.data)


def test_decoder_gradients():
    rng = np.random.default_rng(7)
    dec = Reconstructor(_cfg(), rng, dtype=np.float64)
    randomize_params(dec, rng, scale=0.2)
    fused = rand_tensor(rng, (8, 2, 2), scale=0.5)
    blurry = Tensor(rng.random((3, 8, 8)))
    proj = rng.normal(size=(3, 8, 8))
    assert_gradients_close(lambda: weighted_sum(dec(fused, blurry), proj),
                           list(dec.params()) + [fused], max_elements=5, rng=rng)


def test_full_net_output_shape_and_untrained_identity():
    rng = np.random.default_rng(8)
    net = DeblurNet(_cfg(channels=16, heads=4, points=4), rng)
    frames = [Tensor(np.random.default_rng(9 + i).random((3, 32, 32), dtype=np.float32))
              for i in range(3)]
    out, flows = net.forward(frames)
    assert out.shape == (3, 32, 32)
    assert flows.mid_to_next.shape == (2, 8, 8)
    # zero-initialized final conv makes the untrained net the identity
    np.testing.assert_array_equal(out.data, frames[1].data)


def test_single_adam_step_decreases_loss():
    rng = np.random.default_rng(10)
    cfg = _cfg(channels=8, heads=2, points=3)
    net = DeblurNet(cfg, rng)
    data_rng = np.random.default_rng(11)
    blurry = [Tensor(data_rng.random((3, 16, 16), dtype=np.float32)) for _ in range(3)]
    sharp = [Tensor(data_rng.random((3, 16, 16), dtype=np.float32)) for _ in range(3)]

    def compute_loss():
        restored, flows = net.forward(blurry)
        sd = [resize_bilinear(s, 0.25) for s in sharp]
        return total_loss(mse_loss(restored, sharp[1]), warp_loss(sd, flows), 0.05)

    before = compute_loss()
    opt = Adam(net.params(), lr=1e-4)
    opt.zero_grad()
    before.backward()
    opt.step()
    after = compute_loss()
    assert after.item() < before.item()


def test_cascade_shape_contract_and_sharing():
    rng = np.random.default_rng(12)
    net = CascadedDeblurNet(_cfg(channels=8, heads=2, points=2), rng)
    frames = [Tensor(np.random.default_rng(13 + i).random((3, 16, 16), dtype=np.float32))
              for i in range(5)]
    final, intermediates, flow_sets = net.forward(frames)
    assert final.shape == (3, 16, 16)
    assert len(intermediates) == 3 and len(flow_sets) == 4
    # shared weights: exactly one parameter set
    shared = CascadedDeblurNet(_cfg(), rng, share_weights=True)
    split = CascadedDeblurNet(_cfg(), rng, share_weights=False)
    assert len(list(split.params())) == 2 * len(list(shared.params()))


def test_cascade_stage2_sees_stage1_outputs():
    rng = np.random.default_rng(14)
    net = CascadedDeblurNet(_cfg(channels=8, heads=2, points=2), rng)
    data_rng = np.random.default_rng(15)
    frames = [Tensor(data_rng.random((3, 16, 16), dtype=np.float32)) for _ in range(5)]
    sharp = [Tensor(data_rng.random((3, 16, 16), dtype=np.float32)) for _ in range(5)]

    # inject ground truth as the stage-1 restorations: the final output must
    # equal a direct second-stage pass over the sharp center triplet
    original = net.stage1.forward
    calls = []

    def fake_forward(window, return_attention=False):
        idx = len(calls)
        calls.append(idx)
        if idx < 3:  # the three stage-1 triplets; stage 2 shares the object
            _, flows = original(window)
            return sharp[idx + 1], flows
        return original(window, return_attention)

    net.stage1.forward = fake_forward
    final, intermediates, _ = net.forward(frames)
    net.stage1.forward = original
    for got, want in zip(intermediates, sharp[1:4]):
        np.testing.assert_array_equal(got.data, want.data)
    direct, _ = net.second_stage.forward(sharp[1:4])
    np.testing.assert_array_equal(final.data, direct.data)


def test_motion_estimator_learns_translation_flow():
    """Warp-loss-only training on a translating textured square: the learned
    forward flow must land within 1 px (at feature scale) of the truth on
    the moving region."""
    from vdeblur.data import SceneSpec, ShapeSpec, render_sequence

    scene = SceneSpec(width=32, height=32, frames=3, subframe_factor=1,
                      blur_window=1, texture_cells=8,
                      shapes=[ShapeSpec("rect", (18, 18), (13.0, 15.0), (4.0, 0.0),
                                        color=(0.25, 0.55, 0.75), texture_amp=0.5)])
    sharp = render_sequence(scene, seed=21)
    rng = np.random.default_rng(16)
    net = DeblurNet(_cfg(channels=8, heads=2, points=2), rng)
    frames = [Tensor(f) for f in sharp]
    sharp_down = [resize_bilinear(Tensor(f), 0.25) for f in sharp]
    opt = Adam(net.params(), lr=2e-3)
    for _ in range(150):
        feats = net.encoder(stack(frames, axis=0))
        flows = net.motion([feats[i] for i in range(3)])
        loss = warp_loss(sharp_down, flows)
        opt.zero_grad()
        loss.backward()
        opt.step()

    feats = net.encoder(stack(frames, axis=0))
    flows = net.motion([feats[i] for i in range(3)])
    flow = flows.mid_to_next.data  # should approach (vx, vy)/4 = (1, 0)
    # moving region: the square's core at feature scale, frame 1 (center
    # near (17.25, 15) at image scale -> (4.3, 3.75) at 1/4 scale)
    region = flow[:, 2:6, 3:6]
    truth = np.array([1.0, 0.0])[:, None, None]
    epe = np.sqrt(((region - truth) ** 2).sum(axis=0))
    assert epe.mean() <= 1.0, f"mean endpoint error {epe.mean():.3f} px"
