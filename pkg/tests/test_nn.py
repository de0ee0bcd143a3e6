import numpy as np
import pytest

from sokolab import nn
from sokolab.nn.gradcheck import check_gradients, primitive_check_suite


def test_softmax_uniform_and_entropy():
    logits = nn.constant(np.zeros((1, 4)))
    p = nn.softmax(logits)
    assert np.allclose(p.data, 0.25)
    ent = nn.categorical_entropy(logits)
    assert np.allclose(ent.data, np.log(4.0))


def test_softmax_sums_to_one():
    rng = np.random.default_rng(0)
    p = nn.softmax(nn.constant(rng.standard_normal((64, 4)) * 5))
    assert np.abs(p.data.sum(axis=1) - 1.0).max() < 1e-6
    ent = nn.categorical_entropy(nn.constant(rng.standard_normal((64, 4)) * 5))
    assert (ent.data >= 0).all() and (ent.data <= np.log(4.0) + 1e-6).all()


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(1)
    x = nn.constant(rng.standard_normal((2, 1, 5, 5)))
    w = nn.constant(np.ones((1, 1, 1, 1)))
    b = nn.constant(np.zeros(1))
    y = nn.conv2d(x, w, b)
    assert np.array_equal(y.data, x.data)


def test_conv2d_zero_weights():
    rng = np.random.default_rng(2)
    x = nn.constant(rng.standard_normal((2, 3, 6, 6)))
    w = nn.constant(np.zeros((4, 3, 3, 3)))
    b = nn.constant(np.zeros(4))
    y = nn.conv2d(x, w, b, (1, 1, 1, 1))
    assert np.all(y.data == 0) and y.shape == (2, 4, 6, 6)


def test_conv2d_shape_mismatch():
    x = nn.constant(np.zeros((1, 3, 5, 5)))
    w = nn.constant(np.zeros((2, 4, 3, 3)))
    b = nn.constant(np.zeros(2))
    with pytest.raises(ValueError):
        nn.conv2d(x, w, b)


def test_same_padding_conventions():
    assert nn.same_padding(3) == (1, 1)
    assert nn.same_padding(4) == (1, 2)  # asymmetric: 1 before, 2 after
    rng = np.random.default_rng(3)
    x = nn.constant(rng.standard_normal((1, 2, 10, 10)))
    w = nn.constant(rng.standard_normal((5, 2, 4, 4)))
    b = nn.constant(np.zeros(5))
    y = nn.conv2d(x, w, b, (1, 2, 1, 2))
    assert y.shape == (1, 5, 10, 10)


def test_global_pools():
    x = np.full((3, 2, 4, 4), 2.5)
    assert np.allclose(nn.global_mean_pool(nn.constant(x)).data, 2.5)
    assert np.allclose(nn.global_max_pool(nn.constant(x)).data, 2.5)


def test_broadcast_spatial_tiles():
    x = nn.constant(np.array([[1.0, 2.0]]))
    y = nn.broadcast_spatial(x, 3, 3)
    assert y.shape == (1, 2, 3, 3)
    assert np.all(y.data[0, 0] == 1.0) and np.all(y.data[0, 1] == 2.0)


def test_primitive_gradient_checks():
    results = primitive_check_suite(seed=0)
    worst = max(results.values())
    assert worst < 1e-4, f"primitive gradcheck failed: {results}"


def test_boundary_concat_matches_pad_and_concat():
    rng = np.random.default_rng(4)
    a = nn.constant(rng.standard_normal((2, 3, 5, 5)))
    b = nn.constant(rng.standard_normal((2, 2, 5, 5)))
    boundary = np.zeros((7, 7))
    boundary[0, :] = boundary[-1, :] = boundary[:, 0] = boundary[:, -1] = 1
    fused = nn.boundary_concat([a], boundary, [b])
    pad = (1, 1, 1, 1)
    ref = nn.channel_concat([
        nn.pad_spatial(a, pad),
        nn.constant(np.broadcast_to(boundary, (2, 1, 7, 7))),
        nn.pad_spatial(b, pad),
    ])
    assert np.array_equal(fused.data, ref.data)


def test_boundary_concat_gradient():
    rng = np.random.default_rng(5)
    a = nn.parameter(rng.standard_normal((2, 3, 4, 4)))
    b = nn.parameter(rng.standard_normal((2, 2, 4, 4)))
    boundary = np.ones((6, 6))
    cw = nn.constant(rng.standard_normal((2, 6, 6, 6)))
    errs = check_gradients(
        lambda: nn.sum_all(nn.mul(nn.boundary_concat([a], boundary, [b]), cw)),
        {"a": a, "b": b})
    assert max(errs.values()) < 1e-4


def test_determinism_same_seed_same_result():
    def run():
        rng = np.random.default_rng(7)
        x = nn.constant(rng.standard_normal((2, 3, 6, 6)).astype(np.float32))
        w = nn.parameter(rng.standard_normal((4, 3, 3, 3)).astype(np.float32))
        b = nn.parameter(np.zeros(4, dtype=np.float32))
        y = nn.conv2d(x, w, b, (1, 1, 1, 1))
        loss = nn.mean_all(nn.square(y))
        loss.backward()
        return y.data.copy(), w.grad.copy()

    y1, g1 = run()
    y2, g2 = run()
    assert np.array_equal(y1, y2) and np.array_equal(g1, g2)


class TestInit:
    def test_zero_bias_and_forget_gate(self):
        spec = nn.InitSpec("forget_gate_plus_one", forget_slice=(0, 32))
        b = nn.init(spec, (128,), seed=0)
        assert np.all(b[:32] == 1.0) and np.all(b[32:] == 0.0)
        assert np.all(nn.init(nn.InitSpec("zeros"), (16,), seed=0) == 0.0)

    def test_truncated_normal_std(self):
        fan_in = 3200
        draws = nn.init(nn.InitSpec("truncated_normal", fan_in=fan_in), (256, 3200), seed=1)
        assert draws.size == 819_200
        target = np.sqrt(1.0 / fan_in)
        assert abs(draws.std() - target) / target < 0.05
        # truncation bound: scaled samples stay within 2 rescaled stds
        assert np.abs(draws).max() <= 2.0 * target / 0.8796 + 1e-9

    def test_orthogonal_rows(self):
        w = nn.init(nn.InitSpec("orthogonal"), (4, 256), seed=2)
        gram = w @ w.T
        assert np.abs(gram - np.eye(4)).max() < 1e-5

    def test_init_deterministic(self):
        spec = nn.InitSpec("truncated_normal", fan_in=64)
        assert np.array_equal(nn.init(spec, (8, 64), 5), nn.init(spec, (8, 64), 5))


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        store = nn.ParamStore()
        t = store.add("w", np.ones((3, 3)))
        state = nn.AdamState.for_params(store)
        t.grad = np.zeros((3, 3))
        nn.adam_step(store, state, lr=0.1)
        assert np.array_equal(t.data, np.ones((3, 3)))
        assert state.t == 1

    def test_descends_quadratic(self):
        store = nn.ParamStore()
        w = store.add("w", np.array([1.0]))
        state = nn.AdamState.for_params(store)
        w.grad = 2.0 * w.data
        nn.adam_step(store, state, lr=0.1)
        assert w.data[0] < 1.0

    def test_converges_to_quadratic_minimum(self):
        # f(w) = sum((w - target)^2), minimized at target
        rng = np.random.default_rng(8)
        target = rng.standard_normal(5)
        store = nn.ParamStore()
        w = store.add("w", np.zeros(5))
        state = nn.AdamState.for_params(store)
        for _ in range(200):
            w.grad = 2.0 * (w.data - target)
            nn.adam_step(store, state, lr=0.05)
        assert np.abs(w.data - target).max() < 1e-3

    def test_non_finite_gradient_fails_fast(self):
        store = nn.ParamStore()
        w = store.add("w", np.ones(2))
        state = nn.AdamState.for_params(store)
        w.grad = np.array([np.nan, 0.0])
        with pytest.raises(FloatingPointError):
            nn.adam_step(store, state, lr=0.1)


class TestClip:
    def test_under_norm_unchanged(self):
        store = nn.ParamStore()
        w = store.add("w", np.zeros(4))
        w.grad = np.full(4, 1e-6)
        norm = nn.clip_global_norm(store, max_norm=2.5e-4)
        assert np.allclose(w.grad, 1e-6)
        assert norm == pytest.approx(2e-6)

    def test_clips_to_max_norm_and_keeps_direction(self):
        store = nn.ParamStore()
        w = store.add("w", np.zeros(4))
        g = np.array([0.5, 0.5, 0.5, 0.5])
        w.grad = g.copy()
        nn.clip_global_norm(store, max_norm=2.5e-4)
        assert np.linalg.norm(w.grad) == pytest.approx(2.5e-4, rel=1e-6)
        cos = np.dot(w.grad, g) / (np.linalg.norm(w.grad) * np.linalg.norm(g))
        assert cos == pytest.approx(1.0)


class TestL2Penalty:
    def test_zero_tensor_and_zero_coef(self):
        z = nn.parameter(np.zeros((3, 3)))
        assert nn.l2_penalty([z], 1.0).item() == 0.0
        x = nn.parameter(np.ones((3, 3)))
        assert nn.l2_penalty([x], 0.0).item() == 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        x = nn.parameter(rng.standard_normal((4, 5)))
        errs = check_gradients(lambda: nn.l2_penalty([x], 0.37), {"x": x})
        assert max(errs.values()) < 1e-4

    def test_mean_convention(self):
        x = nn.parameter(np.full((2, 5), 3.0))
        # coefficient * mean of squares = 2 * 9
        assert nn.l2_penalty([x], 2.0).item() == pytest.approx(18.0)
