import numpy as np
import pytest

from sokolab import nn
from sokolab.models import (
    DRCConfig,
    DRCModel,
    ResNetConfig,
    ResNetModel,
    build_model,
    obs_to_input,
)
from sokolab.weights_io import (
    WeightFormatError,
    load_into,
    load_weights,
    save_weights,
    weights_info,
)


class TestParameterCounts:
    def test_drc33(self):
        assert build_model("drc33").params.count_params() == 1_285_125

    def test_drc11(self):
        assert build_model("drc11").params.count_params() == 987_525

    def test_resnet(self):
        assert build_model("resnet").params.count_params() == 3_068_421

    def test_encoder_breakdown(self):
        params = build_model("drc33").params
        assert params["encoder.conv0.w"].size + params["encoder.conv0.b"].size == 1_568
        assert params["encoder.conv1.w"].size + params["encoder.conv1.b"].size == 16_416

    def test_gate_conv_per_layer(self):
        params = build_model("drc33").params
        assert params["drc.l0.gates.w"].size + params["drc.l0.gates.b"].size == 148_736
        assert params["drc.l0.pool.w"].size == 64


def _rand_obs(rng, batch=2, h=10, w=10):
    return rng.random((batch, 3, h, w)).astype(np.float32)


class TestDRCForward:
    def test_zero_weights_uniform_policy(self):
        model = build_model("drc33", seed=0)
        for t in model.params.tensors():
            t.data[:] = 0
        obs = _rand_obs(np.random.default_rng(0))
        logits, value, _ = model.forward(obs, model.initial_state(2))
        assert np.all(logits.data == 0.0)
        p = nn.softmax(logits)
        assert np.allclose(p.data, 0.25)

    def test_forget_bias_initialization(self):
        model = build_model("drc11", seed=0)
        bias = model.params["drc.l0.gates.b"].data
        assert np.all(bias[:32] == 1.0) and np.all(bias[32:] == 0.0)

    def test_statefulness_sequence_equivalence(self):
        # stepping T observations with persisted state == replaying them
        model = DRCModel(DRCConfig(2, 2, channels=8, hidden=16, height=6, width=6), seed=1)
        rng = np.random.default_rng(2)
        obs_seq = [_rand_obs(rng, 1, 6, 6) for _ in range(4)]
        state = model.initial_state(1)
        outs_a = []
        for obs in obs_seq:
            logits, value, state = model.forward(obs, state)
            outs_a.append(logits.data.copy())
        state = model.initial_state(1)
        outs_b = []
        for obs in obs_seq:
            logits, value, state = model.forward(obs, state)
            outs_b.append(logits.data.copy())
        for a, b in zip(outs_a, outs_b):
            assert np.array_equal(a, b)

    def test_forward_pure(self):
        model = build_model("drc11", seed=3)
        obs = _rand_obs(np.random.default_rng(3))
        st = model.initial_state(2)
        l1, v1, _ = model.forward(obs, st)
        st2 = model.initial_state(2)
        l2, v2, _ = model.forward(obs, st2)
        assert np.array_equal(l1.data, l2.data) and np.array_equal(v1.data, v2.data)

    def test_batched_equals_per_item(self):
        model = build_model("drc11", seed=4)
        rng = np.random.default_rng(4)
        obs = _rand_obs(rng, 3)
        logits_b, value_b, _ = model.forward(obs, model.initial_state(3))
        for i in range(3):
            li, vi, _ = model.forward(obs[i:i + 1], model.initial_state(1))
            assert np.allclose(li.data[0], logits_b.data[i], atol=1e-5)
            assert np.allclose(vi.data[0], value_b.data[i], atol=1e-5)

    def test_boundary_constant_no_gradients(self):
        model = DRCModel(DRCConfig(1, 1, channels=4, hidden=8, height=5, width=5),
                         seed=5, dtype=np.float64)
        obs = np.random.default_rng(5).random((1, 3, 5, 5))
        logits, value, _ = model.forward(obs, model.initial_state(1))
        nn.sum_all(logits).backward()
        assert model._boundary.grad is None

    def test_finite_outputs(self):
        model = build_model("drc33", seed=6)
        obs = _rand_obs(np.random.default_rng(6))
        logits, value, _ = model.forward(obs, model.initial_state(2))
        assert np.all(np.isfinite(logits.data)) and np.all(np.isfinite(value.data))


class TestResNetForward:
    def test_zero_weights_uniform(self):
        model = build_model("resnet", seed=0)
        for t in model.params.tensors():
            t.data[:] = 0
        obs = _rand_obs(np.random.default_rng(0))
        logits, _, _ = model.forward(obs)
        assert np.all(logits.data == 0.0)

    def test_residual_identity(self):
        # zeroing both sub-block convs reduces each block to its first conv
        cfg = ResNetConfig(blocks=(8, 8), hidden=16, height=6, width=6)
        model = ResNetModel(cfg, seed=1)
        for name in model.params.names():
            if ".sub" in name:
                model.params[name].data[:] = 0
        obs = _rand_obs(np.random.default_rng(1), 1, 6, 6)
        x = nn.constant(obs)
        p = model.params
        ref = x
        for b in range(2):
            ref = nn.conv2d(ref, p[f"resnet.b{b}.conv.w"], p[f"resnet.b{b}.conv.b"], (1, 2, 1, 2))
        flat = nn.reshape(ref, (1, 8 * 36))
        hidden = nn.relu(nn.affine(flat, p["heads.hidden.w"], p["heads.hidden.b"]))
        want = nn.affine(hidden, p["heads.actor.w"], p["heads.actor.b"])
        got, _, _ = model.forward(obs)
        assert np.allclose(got.data, want.data, atol=1e-6)


class TestObsConversion:
    def test_single_and_batch(self):
        rng = np.random.default_rng(0)
        hwc = rng.random((10, 10, 3)).astype(np.float32)
        x = obs_to_input(hwc)
        assert x.shape == (1, 3, 10, 10)
        assert np.array_equal(x[0, 0], hwc[:, :, 0])
        batch = obs_to_input(np.stack([hwc, hwc]))
        assert batch.shape == (2, 3, 10, 10)


class TestWeightsIO:
    def test_round_trip_bitwise(self, tmp_path):
        model = build_model("drc11", seed=7)
        path = tmp_path / "w.lpw1"
        save_weights(model.params, path)
        loaded = load_weights(path)
        assert set(loaded) == set(model.params.names())
        for name, arr in loaded.items():
            assert arr.tobytes() == model.params[name].data.tobytes()

    def test_load_into_restores_forward(self, tmp_path):
        model = build_model("drc11", seed=8)
        obs = _rand_obs(np.random.default_rng(8))
        ref_logits, _, _ = model.forward(obs, model.initial_state(2))
        path = tmp_path / "w.lpw1"
        save_weights(model.params, path)
        other = build_model("drc11", seed=999)
        load_into(other.params, path)
        got, _, _ = other.forward(obs, other.initial_state(2))
        assert np.array_equal(got.data, ref_logits.data)

    def test_mismatch_lists_every_problem(self, tmp_path):
        small = build_model("drc11", seed=0)
        path = tmp_path / "w.lpw1"
        save_weights(small.params, path)
        big = build_model("drc33", seed=0)
        with pytest.raises(WeightFormatError) as err:
            load_into(big.params, path)
        msg = str(err.value)
        assert "drc.l1.gates.w" in msg and "drc.l2.gates.w" in msg

    def test_info_reports_count(self, tmp_path):
        model = build_model("drc33", seed=0)
        path = tmp_path / "w.lpw1"
        save_weights(model.params, path)
        info = weights_info(path)
        assert info["count"] == 1_285_125

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.lpw1"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_save_is_deterministic(self, tmp_path):
        model = build_model("drc11", seed=9)
        p1, p2 = tmp_path / "a.lpw1", tmp_path / "b.lpw1"
        save_weights(model.params, p1)
        save_weights(model.params, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestToyGradient:
    def test_drc_gradcheck_f64(self):
        from sokolab.nn.gradcheck import check_gradients

        model = DRCModel(DRCConfig(2, 1, channels=3, hidden=6, height=5, width=5),
                         seed=11, dtype=np.float64)
        obs = np.random.default_rng(11).random((2, 3, 5, 5))
        cw = nn.constant(np.random.default_rng(12).standard_normal((2, 4)))

        def f():
            logits, value, _ = model.forward(obs, model.initial_state(2))
            return nn.add(nn.sum_all(nn.mul(logits, cw)), nn.sum_all(nn.square(value)))

        inputs = {name: model.params[name] for name in model.params.names()}
        errs = check_gradients(f, inputs, max_coords=40, seed=0)
        assert max(errs.values()) < 1e-4, errs
