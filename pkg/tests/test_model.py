import numpy as np
import pytest

from pairweight.errors import CacheMismatch, ParseError, ShapeMismatch
from pairweight.model import Adam, MlpEmbedder, adam_step, finite_diff_gradient


def test_identity_linear_layer():
    m = MlpEmbedder(3, hidden_dims=(), head_dim=3)
    m.params["head.0.weight"] = np.eye(3)
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(m.embed(x), x)


def test_zero_weights_give_zero_output():
    m = MlpEmbedder(3, (5,), 2)
    for k in m.params:
        m.params[k][...] = 0.0
    assert not m.embed(np.ones((2, 3))).any()


def test_forward_is_deterministic():
    x = np.random.default_rng(1).normal(size=(6, 4))
    a = MlpEmbedder(4, (8, 8), 3, fusion=True, seed=5).embed(x)
    b = MlpEmbedder(4, (8, 8), 3, fusion=True, seed=5).embed(x)
    assert a.tobytes() == b.tobytes()


def test_forward_shape_errors():
    m = MlpEmbedder(4, (8,), 3)
    with pytest.raises(ShapeMismatch):
        m.forward(np.ones((2, 5)))


def test_fusion_output_width_and_param_counts():
    plain = MlpEmbedder(4, (8, 6), 3)
    fused = MlpEmbedder(4, (8, 6), 3, fusion=True)
    assert plain.output_dim == 3 and fused.output_dim == 6
    assert plain.num_params("head.") == 6 * 3 + 3
    assert fused.num_params("head.") == (8 * 3 + 3) + (6 * 3 + 3)
    assert plain.num_params("trunk.") == fused.num_params("trunk.")


def test_glorot_bounds_and_zero_bias():
    m = MlpEmbedder(10, (30,), 5, seed=3)
    bound = np.sqrt(6 / 40)
    assert np.all(np.abs(m.params["trunk.0.weight"]) <= bound)
    assert not m.params["trunk.0.bias"].any()


def test_backward_linear_identity_and_zero():
    m = MlpEmbedder(3, (), 2)
    x = np.array([[1.0, 2.0, 3.0]])
    g = np.array([[0.5, -1.0]])
    _, cache = m.forward(x)
    grads = m.backward(cache, g)
    np.testing.assert_allclose(grads["head.0.weight"], x.T @ g)
    np.testing.assert_allclose(grads["head.0.bias"], g[0])
    zero = m.backward(cache, np.zeros_like(g))
    assert all(not v.any() for v in zero.values())


def test_backward_cache_checks():
    a, b = MlpEmbedder(3, (4,), 2), MlpEmbedder(3, (4,), 2)
    _, cache = a.forward(np.ones((2, 3)))
    with pytest.raises(CacheMismatch):
        b.backward(cache, np.ones((2, 2)))
    with pytest.raises(CacheMismatch):
        a.backward(cache, np.ones((3, 2)))


@pytest.mark.parametrize("fusion", [False, True])
def test_backward_matches_finite_differences(fusion):
    rng = np.random.default_rng(7)
    m = MlpEmbedder(5, (7, 6), 4, fusion=fusion, seed=2)
    x = rng.normal(size=(6, 5))
    w = rng.normal(size=(6, m.output_dim))
    _, cache = m.forward(x)
    analytic = m.backward(cache, w)

    def loss(params):
        m.params = params
        return float(np.sum(m.forward(x)[0] * w))

    saved = m.params
    numeric = finite_diff_gradient(loss, saved)
    m.params = saved
    for k in analytic:
        np.testing.assert_allclose(analytic[k], numeric[k], rtol=1e-4, atol=1e-7)


def test_lr_scale_prefix_lookup():
    m = MlpEmbedder(3, (4,), 2, lr_scale={"head.": 10.0, "head.0.bias": 2.0})
    assert m.scale_for("trunk.0.weight") == 1.0
    assert m.scale_for("head.0.weight") == 10.0
    assert m.scale_for("head.0.bias") == 2.0


def test_checkpoint_round_trip(tmp_path):
    m = MlpEmbedder(4, (6, 5), 3, fusion=True, seed=11, lr_scale={"head.": 10})
    m.params["trunk.0.bias"] += 1e-3 / 3
    path = tmp_path / "m.json"
    m.save(path)
    back = MlpEmbedder.load(path)
    for k in m.params:
        assert back.params[k].tobytes() == m.params[k].tobytes()
    assert back.fusion and back.lr_scale == {"head.": 10}
    assert path.read_text() == back.to_json()


def test_checkpoint_rejects_garbage(tmp_path):
    with pytest.raises(ParseError):
        MlpEmbedder.from_json("{nope")
    with pytest.raises(ParseError):
        MlpEmbedder.from_json('{"format": "other"}')


def test_copy_is_independent():
    m = MlpEmbedder(3, (4,), 2)
    c = m.copy()
    c.params["head.0.bias"] += 1.0
    assert not m.params["head.0.bias"].any()


# ------------------------------------------------------------------- Adam

def test_adam_first_step_moves_by_lr_sign():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    g = {"w": np.array([0.3, -5.0, 1e-3])}
    Adam(lr=0.01).step(p, g)
    np.testing.assert_allclose(p["w"], [1.0 - 0.01, -2.0 + 0.01, 3.0 - 0.01], atol=1e-7)


def test_adam_zero_gradient_keeps_params():
    p = {"w": np.array([1.0, 2.0])}
    opt = Adam(lr=0.1)
    for _ in range(10):
        adam_step(opt, p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"], [1.0, 2.0])


def test_adam_deterministic_and_matches_reference():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=3) for _ in range(5)]
    a, b = {"w": np.ones(3)}, {"w": np.ones(3)}
    oa, ob = Adam(lr=1e-2), Adam(lr=1e-2)
    m = v = np.zeros(3)
    ref = np.ones(3)
    for t, g in enumerate(grads, start=1):
        oa.step(a, {"w": g})
        ob.step(b, {"w": g})
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert a["w"].tobytes() == b["w"].tobytes()
    np.testing.assert_allclose(a["w"], ref, rtol=1e-14)


def test_adam_frozen_scale_and_shape_check():
    p = {"a": np.zeros(2), "b": np.zeros(2)}
    g = {"a": np.ones(2), "b": np.ones(2)}
    Adam(lr=0.1).step(p, g, lr_scale=lambda k: 10.0 if k == "b" else 1.0, frozen=("a",))
    np.testing.assert_array_equal(p["a"], 0.0)
    np.testing.assert_allclose(p["b"], -1.0, atol=1e-6)
    with pytest.raises(ShapeMismatch):
        Adam().step(p, {"a": np.ones(3)})


# ------------------------------------------------------ finite differences

def test_finite_diff_examples():
    assert finite_diff_gradient(lambda x: float(x[0] ** 2), np.array([3.0]))[0] == \
        pytest.approx(6.0, abs=1e-6)
    assert not finite_diff_gradient(lambda x: 4.2, np.zeros(3)).any()
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda x: 0.0, np.zeros(1), h=0)
