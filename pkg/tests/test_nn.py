import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindbeam import nn


def random_net(rng, widths, acts):
    return [nn.DenseLayer.init(a, b, act, rng) for a, b, act in zip(widths[:-1], widths[1:], acts)]


def test_forward_matches_manual_composition():
    rng = np.random.default_rng(0)
    layers = random_net(rng, [3, 5, 4, 2], ["relu", "tanh", "softmax"])
    x = rng.normal(size=(7, 3))
    h = x
    for l in layers:
        z = h @ l.weights.T + l.bias
        if l.activation == "relu":
            h = np.maximum(z, 0)
        elif l.activation == "tanh":
            h = np.tanh(z)
        else:
            e = np.exp(z - z.max(axis=1, keepdims=True))
            h = e / e.sum(axis=1, keepdims=True)
    out, _ = nn.forward(layers, x)
    np.testing.assert_allclose(out, h, atol=1e-14)
    single, _ = nn.forward(layers, x[2])
    assert single.shape == (2,)
    np.testing.assert_allclose(single, h[2], atol=1e-14)


def test_softmax_vjp_matches_full_jacobian():
    rng = np.random.default_rng(1)
    z = rng.normal(size=5)
    s = nn.softmax(z)
    jac = np.diag(s) - np.outer(s, s)
    g = rng.normal(size=5)
    np.testing.assert_allclose(nn.softmax_vjp(s, g), jac.T @ g, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["relu", "tanh", "identity", "softmax"]))
def test_backprop_matches_central_differences(seed, last):
    rng = np.random.default_rng(seed)
    d = rng.integers(2, 6, size=4)
    layers = random_net(rng, list(d), ["tanh", "relu", last])
    x = rng.normal(size=(int(rng.integers(1, 5)), int(d[0])))
    assert nn.finite_diff_check(layers, x, h=1e-6) < 1e-4


def test_input_gradient_matches_central_differences():
    rng = np.random.default_rng(2)
    layers = random_net(rng, [4, 6, 3], ["tanh", "softmax"])
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 3))
    out, cache = nn.forward(layers, x)
    _, gx = nn.backward(layers, cache, w)
    fd = nn.numeric_grads(lambda: float(np.sum(w * nn.forward(layers, x)[0])), [x], h=1e-6)
    assert nn.compare_grads([gx], fd) < 1e-7


def test_backward_rejects_foreign_cache_and_bad_shapes():
    rng = np.random.default_rng(3)
    a = random_net(rng, [2, 3], ["relu"])
    b = random_net(rng, [2, 3], ["relu"])
    out, cache = nn.forward(a, np.ones((1, 2)))
    with pytest.raises(ValueError, match="cache"):
        nn.backward(b, cache, out)
    with pytest.raises(ValueError, match="shape"):
        nn.backward(a, cache, np.ones((1, 4)))
    with pytest.raises(ValueError, match="input width"):
        nn.forward(a, np.ones((1, 5)))


def test_param_grads_can_be_skipped():
    rng = np.random.default_rng(4)
    layers = random_net(rng, [2, 3, 1], ["relu", "identity"])
    out, cache = nn.forward(layers, rng.normal(size=(4, 2)))
    grads, gx = nn.backward(layers, cache, np.ones_like(out), param_grads=False)
    assert grads == [None, None]
    assert gx.shape == (4, 2)


def adam_by_hand(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return p


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(5)
    p0 = rng.normal(size=(3, 2))
    grads = [rng.normal(size=(3, 2)) for _ in range(6)]
    p = p0.copy()
    state = nn.AdamState.for_params([p])
    for g in grads:
        nn.adam_step([p], [g], state, 0.01)
    want = np.array([[adam_by_hand(p0[i, j], [g[i, j] for g in grads], 0.01) for j in range(2)] for i in range(3)])
    np.testing.assert_allclose(p, want, atol=1e-14)
    assert state.step_count == 6


def test_adam_first_step_moves_by_learning_rate():
    p = np.array([1.0, -1.0])
    nn.adam_step([p], [np.array([3.0, -0.5])], nn.AdamState.for_params([p]), 0.1)
    np.testing.assert_allclose(p, [0.9, -0.9], atol=1e-8)


def test_adam_rejects_mismatched_inputs():
    p = np.zeros(3)
    with pytest.raises(ValueError):
        nn.adam_step([p], [np.zeros(2)], nn.AdamState.for_params([p]), 0.1)
    with pytest.raises(ValueError):
        nn.adam_step([p, p], [np.zeros(3)], nn.AdamState.for_params([p]), 0.1)


def test_pack_params_views_share_one_buffer():
    arrays = [np.arange(6.0).reshape(2, 3), np.array([7.0, 8.0])]
    flat, views = nn.pack_params(arrays)
    np.testing.assert_array_equal(flat, [0, 1, 2, 3, 4, 5, 7, 8])
    flat += 1
    assert views[0][1, 2] == 6.0 and views[1][1] == 9.0


def test_checkpoint_arrays_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    layers = random_net(rng, [3, 4, 2], ["relu", "tanh"])
    arrays, acts = nn.layers_to_arrays("net", layers)
    path = tmp_path / "c.npz"
    nn.save_arrays(path, arrays, {"acts": acts})
    got, meta = nn.load_arrays(path)
    back = nn.layers_from_arrays("net", got, meta["acts"])
    for a, b in zip(layers, back):
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()
        assert a.activation == b.activation


def test_checkpoint_version_checked(tmp_path):
    path = tmp_path / "c.npz"
    nn.save_arrays(path, {}, {})
    with np.load(path) as data:
        payload = dict(data)
    payload["meta"] = np.array('{"version": 99}')
    np.savez(path, **payload)
    with pytest.raises(ValueError, match="version"):
        nn.load_arrays(path)


def test_layer_validation():
    with pytest.raises(ValueError):
        nn.DenseLayer(np.zeros((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        nn.DenseLayer(np.zeros((2, 3)), np.zeros(2), "sigmoid")
    with pytest.raises(ValueError):
        nn.finite_diff_check(random_net(np.random.default_rng(0), [1, 1], ["relu"]), np.ones(1), h=0)
