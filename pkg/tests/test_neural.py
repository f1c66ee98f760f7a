import math

import mpmath
import numpy as np
import pytest

from ftnlab.errors import FormatError, NumericalError, ParameterError
from ftnlab.neural import (Adam, BatchNorm, Conv1D, Dense, LeakyReLU, Model, PlateauTracker, TrainConfig,
                           cnn_specs, dnn_specs, lbce_loss, load_model, lr_schedule_and_stop, mac_count,
                           mse_loss, residual_add, save_model, train)
from ftnlab.neural import gradcheck
from ftnlab.neural.optim import CONTINUE, DECAY_LR, STOP


class TestLayers:
    def test_conv_matches_direct_loop(self):
        rng = np.random.default_rng(0)
        layer = Conv1D(3, 4, 5, rng=rng, dtype=np.float64)
        x = rng.standard_normal((2, 11, 3))
        out = layer.forward(x)
        w, b = layer.params["weight"], layer.params["bias"]
        xp = np.pad(x, ((0, 0), (2, 2), (0, 0)))
        ref = np.zeros((2, 11, 4))
        for n in range(2):
            for t in range(11):
                for f in range(4):
                    ref[n, t, f] = np.sum(xp[n, t:t + 5, :].T * w[f]) + b[f]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_conv_valid_padding_shape(self):
        layer = Conv1D(2, 3, 5, padding=0)
        assert layer.forward(np.zeros((1, 10, 2), np.float32)).shape == (1, 6, 3)

    def test_batchnorm_train_statistics(self):
        rng = np.random.default_rng(1)
        bn = BatchNorm(3, dtype=np.float64)
        x = rng.normal(2.0, 3.0, (8, 20, 3))
        y = bn.forward(x, train=True)
        np.testing.assert_allclose(y.mean(axis=(0, 1)), 0, atol=1e-12)
        np.testing.assert_allclose(y.var(axis=(0, 1)), 1, atol=1e-4)
        # running stats move 10% of the way, variance unbiased
        np.testing.assert_allclose(bn.buffers["running_mean"], 0.1 * x.mean(axis=(0, 1)))
        np.testing.assert_allclose(bn.buffers["running_var"], 0.9 + 0.1 * x.var(axis=(0, 1), ddof=1))

    def test_batchnorm_needs_two_examples(self):
        with pytest.raises(ParameterError):
            BatchNorm(2).forward(np.zeros((1, 4, 2), np.float32), train=True)

    def test_lrelu(self):
        np.testing.assert_allclose(LeakyReLU(0.1).forward(np.array([-2.0, 0.0, 3.0])), [-0.2, 0.0, 3.0])

    def test_dense_shape_check(self):
        with pytest.raises(ParameterError):
            Dense(4, 2).forward(np.zeros((1, 1, 3), np.float32))

    def test_residual_add(self):
        np.testing.assert_array_equal(residual_add(np.ones((1, 2, 3)), np.ones((1, 2, 3))), 2 * np.ones((1, 2, 3)))
        with pytest.raises(ParameterError):
            residual_add(np.ones((1, 2, 3)), np.ones((1, 2, 4)))


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_standard_suite(self, seed):
        results = gradcheck.default_suite(seed=seed)
        assert {r.name for r in results} == {"conv1d", "batchnorm", "lrelu", "dense", "residual", "lbce"}
        for r in results:
            assert r.passed, (r.name, r.max_rel_error)

    def test_high_precision_suite(self):
        for r in gradcheck.default_suite("high"):
            assert r.max_rel_error < 1e-7, r.name

    def test_residual_with_projection(self):
        from ftnlab.neural.layers import Residual
        rng = np.random.default_rng(4)
        layer = Residual([Conv1D(2, 3, 3, rng=rng, dtype=np.float64)],
                         Conv1D(2, 3, 1, rng=rng, dtype=np.float64))
        res = gradcheck.check_layer("proj", layer, rng.standard_normal((3, 7, 2)))
        assert res.passed, res.max_rel_error

    def test_broken_backward_is_detected(self):
        class Broken(LeakyReLU):
            def backward(self, grad):
                return 1.01 * super().backward(grad)

        results = gradcheck.default_suite(factories={"lrelu": lambda: Broken(0.1)})
        failed = [r.name for r in results if not r.passed]
        assert failed == ["lrelu"]

    def test_whole_model_gradient(self):
        model = Model(cnn_specs(n_s=6, width=4, kernel=3, blocks=1), (10, 2), seed=3, dtype=np.float64)
        model.train()
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 10, 2))
        bits = rng.integers(0, 2, (4, 6, 2))
        model.zero_grad()
        _, g = lbce_loss(model.forward(x), bits)
        model.backward(g)
        name, p, grad, _ = next(iter(model.parameters()))
        idx = (0, 1, 2)
        old = p[idx]
        h = 1e-6
        p[idx] = old + h
        lp = lbce_loss(model.forward(x), bits)[0]
        p[idx] = old - h
        lm = lbce_loss(model.forward(x), bits)[0]
        p[idx] = old
        assert grad[idx] == pytest.approx((lp - lm) / (2 * h), rel=1e-5)


class TestLoss:
    def test_anchor_ln2(self):
        assert lbce_loss(np.zeros(4), np.array([0, 1, 0, 1]))[0] == pytest.approx(math.log(2), abs=1e-12)

    def test_extended_precision_reference(self):
        mpmath.mp.dps = 50
        lams = np.array([-30.0, -12.5, -1.0, 0.3, 7.0, 30.0])
        for bit in (0, 1):
            for lam in lams:
                ref = mpmath.log(1 + mpmath.exp(-lam)) if bit == 0 else mpmath.log(1 + mpmath.exp(lam))
                got = lbce_loss(np.array([lam]), np.array([bit]))[0]
                assert abs(got - float(ref)) < 1e-9

    def test_saturated_logits_are_finite(self):
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            loss, grad = lbce_loss(np.array([50.0, -50.0, 1e4]), np.array([1, 0, 1]))
        assert math.isfinite(loss) and np.all(np.isfinite(grad))

    def test_gradient_sign(self):
        # confident and correct: gradient pushes further in the same direction, but only slightly
        _, g = lbce_loss(np.array([3.0]), np.array([0]))
        assert g[0] < 0 and abs(g[0]) < 0.05

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            lbce_loss(np.zeros(3), np.zeros(4))
        with pytest.raises(ParameterError):
            mse_loss(np.zeros(3), np.zeros(4))

    def test_mse(self):
        loss, g = mse_loss(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
        assert loss == pytest.approx(2.5)
        np.testing.assert_allclose(g, [1.0, 2.0])


class TestComplexity:
    def test_cnn_budget(self):
        model = Model(cnn_specs(), (74, 2))
        macs = mac_count(model)
        assert abs(macs - 2.67e6) / 2.67e6 < 0.05
        assert abs(macs / 50 - 53.5e3) / 53.5e3 < 0.05
        assert model.output_shape == (50, 2)

    def test_dnn_budget(self):
        model = Model(dnn_specs(), (1, 148))
        assert abs(mac_count(model) / 50 - 8196) / 8196 < 0.05

    def test_conv_formula(self):
        model = Model([cnn_specs()[0]], (74, 2))
        assert mac_count(model) == 74 * 2 * 9 * 32


class TestOptim:
    def test_adam_first_step_moves_by_lr(self):
        model = Model(dnn_specs(n_out=2, hidden=(3, 3, 3, 3)), (1, 4), dtype=np.float64)
        before = model.state_dict()
        for _, p, g, _ in model.parameters():
            g[...] = 0.5
        Adam(lr=0.01).step(model)
        after = model.state_dict()
        for k in before:
            np.testing.assert_allclose(before[k] - after[k], 0.01, rtol=1e-6)

    def test_l2_only_on_weights(self):
        model = Model(dnn_specs(n_out=2, hidden=(3, 3, 3, 3)), (1, 4), dtype=np.float64)
        for _, layer, key in model.param_refs():
            layer.params[key][...] = 1.0
        Adam(lr=0.1, l2=0.5).step(model)
        state = model.state_dict()
        assert np.all(state["0.dense.weight"] < 1.0)
        np.testing.assert_array_equal(state["0.dense.bias"], 1.0)

    def test_plateau_tracker(self):
        t = PlateauTracker(lr_patience=2, stop_patience=5)
        actions = [t.update(v) for v in [1.0, 0.9, 0.95, 0.95, 0.95, 0.95, 0.95]]
        assert actions == [CONTINUE, CONTINUE, CONTINUE, DECAY_LR, CONTINUE, DECAY_LR, STOP]

    def test_schedule_replay(self):
        cfg = TrainConfig(lr_patience=2, early_stop_patience=5)
        assert lr_schedule_and_stop([1.0, 0.9, 0.95, 0.95], cfg) == DECAY_LR


def _toy_generator(batch, rng):
    x = rng.standard_normal((batch, 1, 4)).astype(np.float32)
    return x, (x @ np.array([[1.0], [-2.0], [0.5], [0.0]], dtype=np.float32))


class TestTraining:
    def test_loss_decreases(self):
        model = Model(dnn_specs(n_out=1, hidden=(16, 16, 16, 16)), (1, 4), seed=0)
        cfg = TrainConfig(batch_size=256, lr_init=0.01, max_epochs=80, loss="mse", l2=0.0)
        res = train(model, _toy_generator, cfg)
        assert res.best_loss < 0.1 * res.history[0]
        assert res.model.mode == "inference"

    def test_zero_lr_keeps_parameters(self):
        model = Model(cnn_specs(n_s=4, width=4, kernel=3, blocks=1), (8, 2), seed=0)
        gen = lambda b, rng: (rng.standard_normal((b, 8, 2)).astype(np.float32),
                              rng.integers(0, 2, (b, 4, 2)))
        res = train(model, gen, TrainConfig(batch_size=16, lr_init=0.0, max_epochs=3))
        for (_, a, _, _), (_, b, _, _) in zip(model.parameters(), res.model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_non_finite_loss(self):
        model = Model(dnn_specs(n_out=1, hidden=(4, 4, 4, 4)), (1, 4))
        gen = lambda b, rng: (np.full((b, 1, 4), np.nan, np.float32), np.zeros((b, 1, 1), np.float32))
        with pytest.raises(NumericalError):
            train(model, gen, TrainConfig(batch_size=8, max_epochs=2, loss="mse"))

    def test_early_stop(self):
        model = Model(dnn_specs(n_out=1, hidden=(4, 4, 4, 4)), (1, 4))
        gen = lambda b, rng: (np.zeros((b, 1, 4), np.float32), np.zeros((b, 1, 1), np.float32))
        res = train(model, gen, TrainConfig(batch_size=8, lr_init=0.0, max_epochs=100, loss="mse",
                                            lr_patience=2, early_stop_patience=4))
        assert res.stopped_early and len(res.history) == 5

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            TrainConfig(lr_patience=10, early_stop_patience=5)
        with pytest.raises(ParameterError):
            TrainConfig(loss="hinge")


class TestSerialize:
    def _model(self):
        model = Model(cnn_specs(n_s=6, width=4, kernel=3, blocks=1), (10, 2), seed=2, meta={"tau": 0.7})
        model.train().forward(np.random.default_rng(0).standard_normal((4, 10, 2)))
        return model.eval()

    def test_roundtrip(self, tmp_path):
        model = self._model()
        save_model(model, tmp_path / "m.ftnm")
        back = load_model(tmp_path / "m.ftnm")
        x = np.random.default_rng(1).standard_normal((3, 10, 2))
        np.testing.assert_array_equal(back.forward(x), model.forward(x))
        assert back.meta == {"tau": 0.7}

    def test_corruption_detected(self, tmp_path):
        path = tmp_path / "m.ftnm"
        save_model(self._model(), path)
        blob = bytearray(path.read_bytes())
        path.write_bytes(bytes(blob[:-5]))
        with pytest.raises(FormatError, match="truncated"):
            load_model(path)
        blob[-3] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="checksum"):
            load_model(path)
        path.write_bytes(b"garbage")
        with pytest.raises(FormatError, match="magic"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.ftnm"
        save_model(self._model(), path)
        path.write_bytes(path.read_bytes().replace(b'"schema":1', b'"schema":9'))
        with pytest.raises(FormatError, match="version"):
            load_model(path)

    def test_state_mismatch(self):
        model = self._model()
        state = model.state_dict()
        state.pop(next(iter(state)))
        with pytest.raises(ParameterError):
            model.load_state_dict(state)
