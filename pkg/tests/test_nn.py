import numpy as np
import pytest
from conftest import fd_gradient_check, tiny_config
from hypothesis import given, settings
from hypothesis import strategies as st

from ampalias.activations import ActivationSpec, Kind, catalog
from ampalias.dsp import Signal
from ampalias.harness import sine_test
from ampalias.metrics import ZeroEnergyError
from ampalias.nn import (
    AdamHyper,
    AdamState,
    TcnConfig,
    adam_step,
    forward,
    forward_backward,
    init_model,
    load_checkpoint,
    parameter_count,
    receptive_field,
    save_checkpoint,
)

IDENTITY = ActivationSpec(Kind.Identity)


class TestConfig:
    def test_default_dilations(self):
        cfg = TcnConfig()
        assert cfg.dilations == (1, 2, 4, 8, 16, 32, 64, 128, 256) * 2
        assert (cfg.channels, cfg.kernel_size, cfg.head_bias) == (16, 3, False)

    def test_receptive_field(self):
        assert receptive_field(TcnConfig()) == 2045
        assert receptive_field(TcnConfig(dilations=(1,))) == 3
        assert receptive_field(TcnConfig(kernel_size=1, dilations=(1, 7, 300))) == 1

    def test_skip_width(self):
        assert TcnConfig().skip_channels == 16
        assert TcnConfig(activation="True_CustomTanh_1").skip_channels == 8

    def test_gated_odd_channels_rejected(self):
        with pytest.raises(ValueError):
            TcnConfig(channels=3, activation="True_Snake_1")

    def test_parameter_count_default(self):
        # input 16x1; per layer conv 16*16*3 + bias 16 + residual 16*16; head 1x16
        assert parameter_count(TcnConfig()) == 16 + 18 * (768 + 16 + 256) + 16 == 18752

    def test_parameter_count_gated(self):
        # conv doubles to 32 outputs, plus a 8x16 skip down-projection; head 1x8
        cfg = TcnConfig(activation="True_CustomTanh_1")
        assert parameter_count(cfg) == 16 + 18 * (1536 + 32 + 256 + 128) + 8 == 35160

    def test_round_trip_dict(self):
        cfg = TcnConfig(channels=4, activation="True_Snake_2.5", head_bias=True)
        assert TcnConfig.from_dict(cfg.to_dict()) == cfg


class TestInit:
    def test_deterministic(self):
        a, b = init_model(TcnConfig(), 7), init_model(TcnConfig(), 7)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_seeds_differ(self):
        a, b = init_model(TcnConfig(), 1), init_model(TcnConfig(), 2)
        assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_bounds(self):
        m = init_model(TcnConfig(), 0)
        assert np.max(np.abs(m.params["layers.0.conv.weight"])) <= 1 / np.sqrt(48)
        assert np.max(np.abs(m.params["layers.3.residual.weight"])) <= 1 / np.sqrt(16)
        assert np.max(np.abs(m.params["input.weight"])) <= 1.0


class TestForward:
    def test_zero_weights(self):
        m = init_model(TcnConfig(channels=4, dilations=(1, 2), activation=IDENTITY), 0)
        for k in m.params:
            if "conv" in k or k.startswith("head"):
                m.params[k][...] = 0.0
        assert np.all(forward(m, np.random.default_rng(0).standard_normal(50)) == 0.0)

    def test_hand_trace_single_path(self):
        cfg = TcnConfig(channels=1, kernel_size=1, dilations=(1,), activation=IDENTITY)
        m = init_model(cfg, 0)
        for v in m.params.values():
            v[...] = 1.0
        x = np.array([0.5, -1.0, 2.0])
        # h0 = x; pre = x + 1; skip = pre; y = skip
        np.testing.assert_array_equal(forward(m, x), x + 1.0)

    def test_hand_trace_two_taps(self):
        cfg = TcnConfig(channels=1, kernel_size=2, dilations=(2,), activation=IDENTITY, conv_bias=False)
        m = init_model(cfg, 0)
        m.params["input.weight"][...] = 1.0
        m.params["layers.0.conv.weight"][...] = [[[3.0, 5.0]]]
        m.params["head.weight"][...] = 2.0
        x = np.array([1.0, 2.0, 3.0, 4.0])
        # y[n] = 2 * (3 x[n-2] + 5 x[n])
        np.testing.assert_array_equal(forward(m, x), [10.0, 20.0, 36.0, 52.0])

    def test_signal_in_signal_out(self):
        m = init_model(tiny_config(), 0)
        out = forward(m, Signal(np.ones(10), 44100))
        assert isinstance(out, Signal) and out.sample_rate == 44100 and len(out) == 10

    def test_batch_matches_rows(self):
        m = init_model(tiny_config("True_Mish"), 3)
        x = np.random.default_rng(1).standard_normal((3, 40))
        batch = forward(m, x)
        for i in range(3):
            np.testing.assert_allclose(batch[i], forward(m, x[i]), rtol=0, atol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 63), st.sampled_from([s.label for s in catalog((0.5, 2.0))]), st.integers(0, 100))
    def test_causal(self, m_idx, label, seed):
        cfg = TcnConfig(channels=4, dilations=(1, 4, 16), activation=label)
        model = init_model(cfg, seed)
        x = np.random.default_rng(seed).standard_normal(64)
        y0 = forward(model, x)
        x2 = x.copy()
        x2[m_idx] += 1.0
        y1 = forward(model, x2)
        np.testing.assert_array_equal(y0[:m_idx], y1[:m_idx])

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
    def test_identity_network_is_linear(self, a, b, seed):
        cfg = TcnConfig(channels=4, dilations=(1, 2, 4), activation=IDENTITY, conv_bias=False)
        m = init_model(cfg, seed)
        rng = np.random.default_rng(seed)
        x1, x2 = rng.standard_normal(80), rng.standard_normal(80)
        lhs = forward(m, a * x1 + b * x2)
        rhs = a * forward(m, x1) + b * forward(m, x2)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)

    def test_identity_model_does_not_alias(self):
        cfg = TcnConfig(channels=8, dilations=(1, 2, 4, 8), activation=IDENTITY)
        assert sine_test(init_model(cfg, 11)).asr < 1e-10


class TestForwardBackward:
    def test_perfect_prediction(self):
        m = init_model(tiny_config("False_Snake_2"), 0)
        x = np.random.default_rng(0).standard_normal(30)
        loss, grads = forward_backward(m, x, forward(m, x))
        assert loss == 0.0
        assert all(np.max(np.abs(g)) <= 1e-12 for g in grads.values())

    def test_loss_matches_metric(self):
        from ampalias.metrics import esr_preemphasized

        m = init_model(tiny_config(), 4)
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal(40), rng.standard_normal(40)
        loss, _ = forward_backward(m, x, y)
        w = m.receptive_field - 1
        assert loss == pytest.approx(esr_preemphasized(y[w:], forward(m, x)[w:]), rel=1e-13)

    def test_batch_loss_is_mean(self):
        m = init_model(tiny_config(), 4)
        rng = np.random.default_rng(9)
        x, y = rng.standard_normal((3, 40)), rng.standard_normal((3, 40))
        loss, _ = forward_backward(m, x, y)
        each = [forward_backward(m, x[i], y[i])[0] for i in range(3)]
        assert loss == pytest.approx(np.mean(each), rel=1e-13)

    @pytest.mark.parametrize("label", ["False_CustomTanh_1", "True_Snake_2", "False_Gaussian", "True_SELU",
                                       "False_ReLUSquaredDip_0.5", "True_Identity"])
    def test_finite_differences(self, label):
        m = init_model(tiny_config(label, head_bias=True), 5)
        rng = np.random.default_rng(5)
        x, y = rng.standard_normal((2, 24)), rng.standard_normal((2, 24))
        assert fd_gradient_check(m, x, y) <= 1.0

    def test_output_scale_gradient_vanishes_at_matched_scale(self):
        """ESR is invariant to joint scaling, so when the target is the
        model's own output the head-scale direction has zero gradient."""
        m = init_model(tiny_config(), 2)
        x = np.random.default_rng(2).standard_normal(40)
        y = forward(m, x)
        _, grads = forward_backward(m, x, 2 * y)
        # d/dc loss(c * head) at c = 1 equals <grad_head, head>
        m2 = m.copy()
        m2.params["head.weight"] *= 2.0
        _, g2 = forward_backward(m2, x, 2 * y)
        assert abs(np.sum(g2["head.weight"] * m2.params["head.weight"])) < 1e-12
        assert np.sum(grads["head.weight"] * m.params["head.weight"]) < 0

    def test_errors(self):
        m = init_model(tiny_config(), 0)
        with pytest.raises(ValueError):
            forward_backward(m, np.ones(10), np.ones(11))
        with pytest.raises(ZeroEnergyError):
            forward_backward(m, np.ones(10), np.zeros(10))
        with pytest.raises(ValueError):
            forward_backward(m, np.ones(3), np.ones(3))


class TestAdam:
    def _scalar_model(self, value=0.0):
        m = init_model(TcnConfig(channels=1, kernel_size=1, dilations=(1,), activation=IDENTITY, conv_bias=False), 0)
        for v in m.params.values():
            v[...] = value
        return m

    def test_zero_gradient(self):
        m = init_model(tiny_config(), 0)
        before = m.copy()
        adam_step(m, {k: np.zeros_like(v) for k, v in m.params.items()}, AdamState())
        assert all(np.array_equal(m.params[k], before.params[k]) for k in m.params)

    def test_first_step(self):
        # m = 0.1, v = 0.001 -> bias-corrected 1 and 1 -> step lr / (1 + eps)
        m = self._scalar_model()
        grads = {k: np.ones_like(v) for k, v in m.params.items()}
        adam_step(m, grads, AdamState(), AdamHyper(lr=0.1))
        assert m.params["head.weight"][0, 0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-15)

    def test_deterministic(self):
        a, b = init_model(tiny_config(), 3), init_model(tiny_config(), 3)
        g = {k: np.full_like(v, 0.3) for k, v in a.params.items()}
        sa, sb = AdamState(), AdamState()
        for _ in range(3):
            adam_step(a, g, sa)
            adam_step(b, g, sb)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_shape_mismatch(self):
        m = init_model(tiny_config(), 0)
        g = {k: np.zeros(v.size + 1) for k, v in m.params.items()}
        with pytest.raises(ValueError):
            adam_step(m, g, AdamState())


class TestCheckpoint:
    @pytest.mark.parametrize("label", ["False_CustomTanh_0.8", "True_Snake_2.9"])
    def test_round_trip(self, tmp_path, label):
        m = init_model(TcnConfig(channels=4, dilations=(1, 2, 4), activation=label, head_bias=True), 8)
        save_checkpoint(m, tmp_path / "m.npz")
        back = load_checkpoint(tmp_path / "m.npz")
        assert back.config == m.config
        assert list(back.params) == list(m.params)
        assert all(np.array_equal(back.params[k], m.params[k]) for k in m.params)

    def test_rejects_other_formats(self, tmp_path):
        np.savez(tmp_path / "x.npz", __format__=np.array("other/9"))
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "x.npz")
