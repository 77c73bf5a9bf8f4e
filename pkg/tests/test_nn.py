import numpy as np
import pytest

from firewatch import nn
from firewatch.nn import (
    ConfigError,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    Network,
    ReLU,
    build_q_network,
    load_weights,
    masked_loss_and_grads,
    save_weights,
)

from helpers import REL_TOL, finite_difference, random_batch, rel_err, small_net

@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    net = small_net(seed)
    s, img, target, mask = random_batch(net, seed)
    _, grads = masked_loss_and_grads(net, s, img, target, mask)
    numeric = finite_difference(net, s, img, target, mask)
    for layer, g, gn in zip(net.layers, grads, numeric):
        for name in layer.params:
            assert rel_err(g[name], gn[name]).max() < REL_TOL, (layer.kind, name)


def test_zero_error_zero_gradients():
    net = small_net(0)
    s, img, _, mask = random_batch(net, 0)
    q = net.forward(s, img)
    _, grads = masked_loss_and_grads(net, s, img, q, mask)
    assert all(np.all(v == 0) for g in grads for v in g.values())


def test_masked_output_untouched_in_linear_net():
    rng = np.random.default_rng(0)
    net = Network([Dense(3, 2, rng, np.float64)], [], [], 3)
    s = rng.normal(size=(4, 3))
    mask = np.tile([1.0, 0.0], (4, 1))
    _, grads = masked_loss_and_grads(net, s, None, rng.normal(size=(4, 2)), mask)
    assert np.all(grads[0]["W"][:, 1] == 0) and grads[0]["b"][1] == 0
    assert np.any(grads[0]["W"][:, 0] != 0)


def test_zero_weights_zero_output():
    net = build_q_network()
    for p in net.parameters():
        p[...] = 0
    q = net.forward(np.ones(5), np.ones((1, 64, 64)))
    assert np.array_equal(q, np.zeros((1, 2)))


def test_identity_dense_passes_input():
    d = Dense(2, 2, dtype=np.float64)
    d.params["W"][...] = np.eye(2)
    net = Network([d], [], [], 2)
    x = np.array([[0.3, -1.2]])
    assert np.array_equal(net.forward(x), x)


def reference_forward(net, s, img):
    """Loop-based evaluation written independently of the layer classes."""

    def dense(layer, x):
        w, b = layer.params["W"], layer.params["b"]
        return np.array([[sum(x[n, i] * w[i, o] for i in range(w.shape[0])) + b[o] for o in range(w.shape[1])] for n in range(x.shape[0])])

    def conv(layer, x):
        w, b, st = layer.params["W"], layer.params["b"], layer.stride
        n, c, h, ww = x.shape
        k = layer.kernel
        ho, wo = (h - k) // st + 1, (ww - k) // st + 1
        out = np.zeros((n, w.shape[0], ho, wo))
        for a in range(n):
            for o in range(w.shape[0]):
                for i in range(ho):
                    for j in range(wo):
                        patch = x[a, :, i * st : i * st + k, j * st : j * st + k]
                        out[a, o, i, j] = np.sum(patch * w[o]) + b[o]
        return out

    def pool(layer, x):
        p = layer.window
        n, c, h, w = x.shape
        out = np.zeros((n, c, h // p, w // p))
        for i in range(h // p):
            for j in range(w // p):
                out[:, :, i, j] = x[:, :, i * p : i * p + p, j * p : j * p + p].max(axis=(2, 3))
        return out

    def run(layers, x):
        for layer in layers:
            if isinstance(layer, Dense):
                x = dense(layer, x)
            elif isinstance(layer, Conv2D):
                x = conv(layer, x)
            elif isinstance(layer, MaxPool2D):
                x = pool(layer, x)
            elif isinstance(layer, ReLU):
                x = np.maximum(x, 0)
            elif isinstance(layer, Flatten):
                x = x.reshape(x.shape[0], -1)
        return x

    h = run(net.scalar_layers, s)
    if net.image_layers:
        h = np.concatenate([h, run(net.image_layers, img)], axis=1)
    return run(net.head_layers, h)


@pytest.mark.parametrize("seed", range(3))
def test_forward_matches_reference(seed):
    net = small_net(seed)
    s, img, _, _ = random_batch(net, seed)
    assert np.allclose(net.forward(s, img), reference_forward(net, s, img), rtol=1e-6, atol=1e-12)


def test_float32_forward_matches_reference():
    net = build_q_network(rng=np.random.default_rng(1))
    rng = np.random.default_rng(2)
    s = rng.normal(size=(2, 5)).astype(np.float32)
    img = (rng.random((2, 1, 64, 64)) < 0.2).astype(np.float32)
    q = net.forward(s, img)
    ref = reference_forward(net.astype(np.float64), s.astype(np.float64), img.astype(np.float64))
    assert q.dtype == np.float32
    assert np.allclose(q, ref, rtol=1e-5, atol=1e-5)


def test_default_architecture_shapes():
    net = build_q_network()
    assert net.branch_features == 32
    assert net.image_features == 16 * 6 * 6
    assert all(p.dtype == np.float32 for p in net.parameters())


def test_dimension_mismatch_raises():
    net = build_q_network()
    with pytest.raises(ConfigError):
        net.forward(np.ones((1, 4)), np.ones((1, 1, 64, 64)))
    with pytest.raises(ConfigError):
        net.forward(np.ones((1, 5)), np.ones((1, 1, 32, 32)))
    with pytest.raises(ConfigError):
        Network([Dense(5, 3)], [], [Dense(4, 2)], 5)


def test_maxpool_first_index_wins_ties():
    pool = MaxPool2D(2)
    x = np.ones((1, 1, 2, 2))
    pool.forward(x)
    dx, _ = pool.backward(np.ones((1, 1, 1, 1)))
    assert dx[0, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_weight_file_round_trip(tmp_path):
    net = build_q_network(rng=np.random.default_rng(3))
    path = tmp_path / "q.bin"
    save_weights(net, path)
    raw = path.read_bytes()
    assert raw[:4] == nn.MAGIC
    back = load_weights(path)
    for a, b in zip(net.parameters(), back.parameters()):
        assert np.array_equal(a, b)
    rng = np.random.default_rng(4)
    s, img = rng.normal(size=(1, 5)), rng.random((1, 1, 64, 64))
    assert np.array_equal(net.forward(s, img), back.forward(s, img))


def test_weight_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"nope")
    with pytest.raises(ConfigError):
        load_weights(path)
