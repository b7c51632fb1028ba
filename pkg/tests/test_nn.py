import numpy as np
import pytest

from corrsim import nn
from corrsim.errors import ShapeMismatch
from corrsim.rng import stream


def test_dense_identity():
    p = nn.DenseParams(np.eye(2), np.zeros(2))
    assert np.allclose(nn.dense_forward(p, np.array([1.0, 2.0])), [1.0, 2.0])


def test_dense_1x1():
    p = nn.DenseParams(np.array([[3.0]]), np.array([1.0]))
    assert nn.dense_forward(p, np.array([2.0]))[0] == 7.0


def test_dense_shape_mismatch():
    p = nn.DenseParams(np.eye(2), np.zeros(2))
    with pytest.raises(ShapeMismatch):
        nn.dense_forward(p, np.ones(3))


def _dense_loss(p, x, t):
    def f():
        y = nn.dense_forward(p, x)
        loss, g = nn.mse_loss(y, t)
        g_w, g_b, g_x = nn.dense_backward(p, x, g)
        return loss, {"w": g_w, "b": g_b}
    return f


def test_dense_gradient_check():
    rng = stream(2, "nn-dense")
    for _ in range(10):
        p = nn.init_dense(rng, 4, 3)
        x = rng.normal(size=(5, 3))
        t = rng.normal(size=(5, 4))
        err = nn.gradient_check(_dense_loss(p, x, t), {"w": p.weight, "b": p.bias})
        assert err < 1e-4


def test_dense_input_gradient():
    rng = stream(3, "nn-dense-x")
    p = nn.init_dense(rng, 4, 3)
    x = rng.normal(size=(2, 3))
    t = rng.normal(size=(2, 4))

    def loss_only():
        y = nn.dense_forward(p, x)
        return nn.mse_loss(y, t)[0]

    _, g = nn.mse_loss(nn.dense_forward(p, x), t)
    _, _, g_x = nn.dense_backward(p, x, g)
    numeric = nn.numeric_gradient(loss_only, x)
    assert nn.max_relative_error(g_x, numeric) < 1e-4


def test_tconv_identity_kernel():
    # kernel_w = 1 identity kernels pass the input through
    p = nn.TConvParams(np.eye(3).reshape(3, 3, 1), np.zeros(3))
    x = stream(4, "tconv").normal(size=(6, 3))
    assert np.allclose(nn.tconv_forward(p, x), x)


def test_tconv_averaging_preserves_constants():
    p = nn.TConvParams(np.array([[[0.5, 0.5]]]), np.zeros(1))
    x = np.full((8, 1), 3.25)
    assert np.allclose(nn.tconv_forward(p, x), 3.25)


def test_tconv_causality():
    rng = stream(5, "tconv-causal")
    p = nn.init_tconv(rng, 2, 3, 4)
    x = rng.normal(size=(10, 3))
    y = nn.tconv_forward(p, x)
    x2 = x.copy()
    x2[7:] += 100.0  # future change must not affect frames < 7
    y2 = nn.tconv_forward(p, x2)
    assert np.allclose(y[:7], y2[:7])
    assert not np.allclose(y[7:], y2[7:])


def test_tconv_gradient_check():
    rng = stream(6, "tconv-grad")
    for _ in range(10):
        p = nn.init_tconv(rng, 2, 3, 3)
        x = rng.normal(size=(7, 3))
        t = rng.normal(size=(7, 2))

        def f():
            y = nn.tconv_forward(p, x)
            loss, g = nn.mse_loss(y, t)
            g_k, g_b, g_x = nn.tconv_backward(p, x, g)
            return loss, {"k": g_k, "b": g_b, "x": g_x}

        err = nn.gradient_check(f, {"k": p.kernels, "b": p.bias, "x": x})
        assert err < 1e-4


def test_mse_zero_error():
    loss, grad = nn.mse_loss(np.ones((3, 2)), np.ones((3, 2)))
    assert loss == 0.0 and np.all(grad == 0.0)


def test_mse_single_element():
    loss, grad = nn.mse_loss(np.array([[2.0]]), np.array([[0.0]]), np.array([1.0]))
    assert loss == 4.0 and grad[0, 0] == 4.0


def test_weighted_mse_all_ones_matches_unweighted():
    rng = stream(7, "mse")
    p = rng.normal(size=(5, 3))
    t = rng.normal(size=(5, 3))
    l1, g1 = nn.mse_loss(p, t)
    l2, g2 = nn.mse_loss(p, t, np.ones(5))
    assert l1 == l2 and np.array_equal(g1, g2)


def test_adam_first_step_closed_form():
    # step 1 with constant grad g: update = -lr * g / (|g| + eps') with the
    # bias-corrected moments both reducing to g and g^2
    lr = 1e-3
    st = nn.AdamState(lr=lr)
    params = {"p": np.array([1.0, -2.0])}
    g = np.array([0.3, -0.7])
    nn.adam_step(st, params, {"p": g.copy()})
    expected = np.array([1.0, -2.0]) - lr * g / (np.abs(g) + st.eps)
    assert np.allclose(params["p"], expected, atol=1e-12)


def test_adam_zero_grad_no_change():
    st = nn.AdamState()
    params = {"p": np.array([1.0])}
    nn.adam_step(st, params, {"p": np.zeros(1)})
    assert params["p"][0] == 1.0


def test_adam_determinism():
    def run():
        rng = stream(8, "adam")
        st = nn.AdamState(lr=1e-2)
        params = {"p": rng.normal(size=4)}
        for _ in range(20):
            g = params["p"] * 2 + rng.normal(size=4)
            nn.adam_step(st, params, {"p": g})
        return params["p"]

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_mlp_gradient_check():
    rng = stream(9, "mlp")
    mlp = nn.MLP.create(rng, [4, 6, 3])
    x = rng.normal(size=(5, 4))
    t = rng.normal(size=(5, 3))

    def f():
        cache = []
        y = mlp.forward(x, cache)
        loss, g = nn.mse_loss(y, t)
        grads, _ = mlp.backward(cache, g)
        return loss, grads

    err = nn.gradient_check(f, mlp.params())
    assert err < 1e-4
