import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from omnisal.data import Scanpath, synthesize_scene
from omnisal.errors import DomainError, FormatError, ShapeError
from omnisal.nn import (ModelConfig, OptimizerConfig, Tensor, TrainingBatch, attention_refine, conv2d,
                        forward, gated_residual, grad_check, init_params, loss_l1, loss_l2, maxpool2,
                        predict, relu, sigmoid, soft_argmax, train_stage1, train_stage2, upsample2)
from omnisal.nn import checkpoint
from omnisal.nn.checks import layer_checks
from omnisal.nn.gradcheck import relative_error
from omnisal.nn.losses import bce, kl_div, nss

SMALL = ModelConfig(width=32, height=16, encoder_widths=(4, 4, 6, 6), decoder_widths=(6, 4, 4, 4),
                    attention_width=4, aux_widths=(6, 6), n_fixations=10, beta=5.0)


def _small_batch(seeds=(0,), cfg=SMALL):
    scenes = [synthesize_scene(s, cfg.width, cfg.height, n_scanpaths=4, n_fixations=cfg.n_fixations)
              for s in seeds]
    return TrainingBatch.from_scenes(scenes, cfg.n_fixations)


class TestAutograd:
    def test_product_rule(self):
        x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        y = Tensor(np.array([3.0, 4.0]), requires_grad=True)
        (x * y + x).sum().backward()
        np.testing.assert_array_equal(x.grad, [4.0, 5.0])
        np.testing.assert_array_equal(y.grad, [2.0, -1.0])

    def test_broadcast_gradient(self):
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        b = Tensor(np.ones(3), requires_grad=True)
        (x + b).sum().backward()
        np.testing.assert_array_equal(b.grad, [2.0, 2.0, 2.0])

    def test_reused_node_accumulates(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        y = x * x
        (y + y).backward()
        assert x.grad == 12.0

    def test_no_graph_without_grad(self):
        out = Tensor(np.ones(2)) * 2.0
        assert not out.requires_grad

    def test_linear_layer_check(self):
        rng = np.random.default_rng(0)
        w = Tensor(rng.normal(size=(4, 3)))
        x = Tensor(rng.normal(size=(5, 4)))
        r = Tensor(rng.normal(size=(5, 3)))
        assert grad_check(lambda: ((x @ w) * r).sum(), [w, x], n_coords=50) < 1e-8

    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1.0, 1.0 + 1e-9) < 1e-9


class TestLayers:
    def test_identity_kernel(self):
        x = Tensor(np.random.default_rng(0).normal(size=(2, 1, 5, 6)))
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        np.testing.assert_array_equal(conv2d(x, Tensor(w)).data, x.data)

    def test_conv_matches_direct_loops(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 2, 5, 4))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b), padding=2, dilation=2).data
        xp = np.pad(x, ((0, 0), (0, 0), (2, 2), (2, 2)))
        ref = np.zeros((1, 3, 5, 4))
        for o in range(3):
            for r in range(5):
                for c in range(4):
                    patch = xp[0, :, r:r + 5:2, c:c + 5:2]
                    ref[0, o, r, c] = (patch * w[o]).sum() + b[o]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_conv_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))

    def test_maxpool_constant_first_index(self):
        x = Tensor(np.full((1, 1, 4, 4), 2.0), requires_grad=True)
        out = maxpool2(x)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 2.0))
        out.sum().backward()
        expected = np.zeros((4, 4))
        expected[::2, ::2] = 1.0
        np.testing.assert_array_equal(x.grad[0, 0], expected)

    def test_maxpool_odd(self):
        with pytest.raises(ShapeError):
            maxpool2(Tensor(np.ones((1, 1, 3, 4))))

    def test_upsample_nearest(self):
        x = Tensor(np.arange(4.0).reshape(1, 1, 2, 2))
        np.testing.assert_array_equal(upsample2(x).data[0, 0],
                                      [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]])

    def test_relu_sigmoid(self):
        x = Tensor(np.array([-2.0, 0.0, 3.0]))
        np.testing.assert_array_equal(relu(x).data, [0.0, 0.0, 3.0])
        np.testing.assert_allclose(sigmoid(x).data, 1 / (1 + np.exp(-x.data)), atol=1e-15)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_finite_differences(self, seed):
        for name, err in layer_checks(seed=seed).items():
            assert err < 1e-4, name


class TestGatedResidual:
    def test_gamma_zero_identity(self):
        cfg = SMALL
        params = init_params(cfg, seed=0, gamma=0.0)
        x = Tensor(np.random.default_rng(0).normal(size=(1, cfg.encoder_widths[-1], 1, 2)))
        np.testing.assert_array_equal(attention_refine(params, x, cfg).data, x.data)

    def test_all_ones_attention_doubles(self):
        x = Tensor(np.random.default_rng(0).normal(size=(2, 3, 4, 4)))
        out = gated_residual(x, Tensor(np.ones((2, 1, 4, 4))), Tensor(np.array(1.0)))
        np.testing.assert_array_equal(out.data, 2 * x.data)

    def test_gamma_gradient(self):
        cfg = SMALL
        params = init_params(cfg, seed=1, gamma=0.5, bias_std=0.1)
        x = Tensor(np.random.default_rng(1).normal(size=(1, cfg.encoder_widths[-1], 1, 2)))
        gamma = params["attention.gamma"]
        assert grad_check(lambda: attention_refine(params, x, cfg).sum(), [gamma], 1) < 1e-4


class TestSoftArgmax:
    def test_delta(self):
        x = np.zeros((1, 1, 4, 4))
        x[0, 0, 3, 2] = 1.0     # row j=3, column i=2
        np.testing.assert_allclose(soft_argmax(Tensor(x), 50.0).data[0, 0], [0.5, 0.75], atol=1e-6)

    def test_uniform(self):
        out = soft_argmax(Tensor(np.zeros((1, 1, 4, 4))), 1.0).data[0, 0]
        assert tuple(out) == (0.375, 0.375)

    @settings(max_examples=30)
    @given(arrays(np.float64, (2, 3, 4, 5), elements=st.floats(-3, 3)), st.floats(-100, 100),
           st.floats(0.1, 20.0))
    def test_shift_invariance_and_range(self, x, c, beta):
        a = soft_argmax(Tensor(x), beta).data
        b = soft_argmax(Tensor(x + c), beta).data
        np.testing.assert_allclose(b, a, atol=1e-12)
        assert np.all(a >= 0) and np.all(a < 1)

    def test_large_beta_hard_argmax(self):
        rng = np.random.default_rng(0)
        h, w = 6, 8
        x = rng.random((1, 5, h, w))
        out = soft_argmax(Tensor(x), 1e3).data[0]
        for ch in range(5):
            j, i = np.unravel_index(np.argmax(x[0, ch]), (h, w))
            assert np.all(np.abs(out[ch] - [i / w, j / h]) <= 1 / (2 * max(h, w)))

    def test_bad_beta(self):
        with pytest.raises(DomainError):
            soft_argmax(Tensor(np.zeros((1, 1, 2, 2))), 0.0)


class TestModel:
    def test_forward_shapes_and_ranges(self):
        cfg = ModelConfig(width=64, height=32)
        params = init_params(cfg, seed=0)
        img = synthesize_scene(0, 64, 32, n_scanpaths=1, n_fixations=1).image
        sal, coords = forward(params, img[None], cfg)
        assert sal.shape == (1, 1, 32, 64) and coords.shape == (1, 100, 2)
        assert np.all(sal.data > 0) and np.all(sal.data < 1)
        assert np.all(coords.data >= 0) and np.all(coords.data < 1)

    def test_deterministic(self):
        params = init_params(SMALL, seed=3)
        img = np.random.default_rng(0).random((1, 3, 16, 32))
        a = forward(params, img, SMALL)
        b = forward(params, img, SMALL)
        assert np.array_equal(a[0].data, b[0].data) and np.array_equal(a[1].data, b[1].data)

    def test_wrong_image_shape(self):
        with pytest.raises(ShapeError):
            forward(init_params(SMALL), np.zeros((1, 3, 16, 16)), SMALL)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ModelConfig(width=40, height=16)
        with pytest.raises(DomainError):
            ModelConfig(n_fixations=0)

    def test_predict(self):
        params = init_params(SMALL, seed=0)
        sal, sp = predict(params, np.random.default_rng(0).random((3, 16, 32)), SMALL)
        assert sal.shape == (16, 32) and isinstance(sp, Scanpath)
        assert len(sp) == SMALL.n_fixations and sp.t is None


class TestLosses:
    def test_l2_zero(self):
        p = np.random.default_rng(0).random((1, 5, 2))
        assert loss_l2(Tensor(p), p).item() == 0.0

    def test_l2_offset(self):
        np.testing.assert_allclose(loss_l2(Tensor(np.array([[0.6, 0.5]])), np.array([[0.5, 0.5]])).item(),
                                   0.01, atol=1e-15)

    def test_l2_mismatch(self):
        with pytest.raises(ShapeError):
            loss_l2(Tensor(np.zeros((3, 2))), np.zeros((4, 2)))

    def test_l2_gradient(self):
        rng = np.random.default_rng(0)
        p = Tensor(rng.random((2, 7, 2)))
        target = rng.random((2, 7, 2))
        assert grad_check(lambda: loss_l2(p, target), [p], n_coords=28) < 1e-6

    def test_l1_term_decomposition(self):
        rng = np.random.default_rng(0)
        y = rng.uniform(0.05, 0.95, (1, 1, 8, 16))
        fix = (rng.random((1, 1, 8, 16)) < 0.2).astype(float)
        fix[0, 0, 0, 0] = 1
        kl = kl_div(Tensor(y), y).item()
        assert abs(kl) < 1e-4    # only the epsilon terms remain
        total = loss_l1(Tensor(y), y, fix).item()
        rest = 0.2 * bce(Tensor(y), y).item() - 0.2 * nss(Tensor(y), fix).item()
        np.testing.assert_allclose(total, 0.8 * kl + rest, atol=1e-12)
        np.testing.assert_allclose(total, rest, atol=1e-4)

    def test_l1_gradient(self):
        rng = np.random.default_rng(1)
        yhat = Tensor(rng.uniform(0.05, 0.95, (1, 1, 8, 16)))
        y = rng.uniform(0.0, 1.0, (1, 1, 8, 16))
        fix = (rng.random((1, 1, 8, 16)) < 0.2).astype(float)
        fix[0, 0, 2, 3] = 1
        assert grad_check(lambda: loss_l1(yhat, y, fix), [yhat], n_coords=60) < 1e-4

    def test_l1_constant_prediction_finite(self):
        fix = np.zeros((1, 1, 4, 4))
        fix[0, 0, 1, 1] = 1
        assert np.isfinite(loss_l1(Tensor(np.full((1, 1, 4, 4), 0.5)), np.full((1, 1, 4, 4), 0.5), fix).item())

    def test_l1_needs_fixation(self):
        with pytest.raises(DomainError):
            loss_l1(Tensor(np.full((1, 1, 4, 4), 0.5)), np.ones((1, 1, 4, 4)), np.zeros((1, 1, 4, 4)))


class TestTraining:
    def test_stage1_monotone(self):
        cfg = ModelConfig(width=64, height=32)
        batch = TrainingBatch.from_scenes([synthesize_scene(0, 64, 32)])
        history = []
        train_stage1(init_params(cfg, seed=0), batch, cfg, OptimizerConfig(1e-4, 50), history=history)
        assert np.sum(np.diff(history) > 0) <= 5
        assert history[-1] < history[0]

    def test_stage2_freeze_contract(self):
        params = init_params(SMALL, seed=0, gamma=0.3)
        batch = _small_batch()
        train_stage1(params, batch, SMALL, OptimizerConfig(1e-3, 3))
        before = params.state()
        train_stage2(params, batch, SMALL, OptimizerConfig(1e-3, 5))
        after = params.state()
        for name, value in before.items():
            if name.startswith("aux."):
                continue
            assert after[name].tobytes() == value.tobytes(), name
        assert any(not np.array_equal(after[n], before[n]) for n in before if n.startswith("aux."))

    def test_stage1_leaves_aux(self):
        params = init_params(SMALL, seed=0)
        before = params.state()
        train_stage1(params, _small_batch(), SMALL, OptimizerConfig(1e-3, 2))
        after = params.state()
        assert all(np.array_equal(after[n], before[n]) for n in before if n.startswith("aux."))
        assert not np.array_equal(after["encoder.block0.conv0.weight"], before["encoder.block0.conv0.weight"])

    def test_deterministic_trajectory(self):
        runs = []
        for _ in range(2):
            params = init_params(SMALL, seed=4)
            h = []
            train_stage1(params, _small_batch((1, 2)), SMALL, OptimizerConfig(1e-3, 3), history=h)
            train_stage2(params, _small_batch((1, 2)), SMALL, OptimizerConfig(1e-3, 3), history=h)
            runs.append((h, params.state()))
        assert runs[0][0] == runs[1][0]
        assert all(np.array_equal(runs[0][1][n], runs[1][1][n]) for n in runs[0][1])

    def test_empty_dataset(self):
        with pytest.raises(DomainError):
            train_stage1(init_params(SMALL), [], SMALL)

    def test_target_length_mismatch(self):
        scene = synthesize_scene(0, 32, 16, n_scanpaths=2, n_fixations=3)
        with pytest.raises(ShapeError):
            TrainingBatch.from_scenes([scene], n_fixations=10)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = init_params(SMALL, seed=2, gamma=0.25)
        checkpoint.save(tmp_path / "m.spw", params, SMALL)
        loaded, cfg = checkpoint.load(tmp_path / "m.spw")
        assert cfg == SMALL
        for name, value in params.state().items():
            np.testing.assert_array_equal(loaded[name].data, value.astype(np.float32))
        assert checkpoint.dumps(loaded, cfg) == checkpoint.dumps(params, SMALL)

    def test_truncated(self):
        data = checkpoint.dumps(init_params(SMALL), SMALL)
        with pytest.raises(FormatError, match="truncated"):
            checkpoint.loads(data[:-10])

    def test_bad_magic(self):
        data = checkpoint.dumps(init_params(SMALL), SMALL)
        with pytest.raises(FormatError):
            checkpoint.loads(b"XXXX" + data[4:])

    def test_trailing_bytes(self):
        data = checkpoint.dumps(init_params(SMALL), SMALL)
        with pytest.raises(FormatError):
            checkpoint.loads(data + b"\0")
