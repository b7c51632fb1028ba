"""Minimal deterministic neural-network stack with analytic gradients.

Dense layers, causal 1-D temporal convolution, ReLU, weighted MSE, and Adam,
all on float64 numpy arrays.  Every backward pass is exact and verified
against central finite differences in the test suite.  No framework is used
so that training runs are bit-reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


# ---------------------------------------------------------------------------
# dense layer

@dataclass
class DenseParams:
    weight: np.ndarray  # [out, in]
    bias: np.ndarray    # [out]


def init_dense(rng: np.random.Generator, n_out: int, n_in: int, zero: bool = False) -> DenseParams:
    """Scaled-uniform init in +-sqrt(6/(in+out)); zero=True for residual heads."""
    if zero:
        return DenseParams(np.zeros((n_out, n_in)), np.zeros(n_out))
    limit = np.sqrt(6.0 / (n_in + n_out))
    return DenseParams(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))


def dense_forward(p: DenseParams, x: np.ndarray) -> np.ndarray:
    """y = W x + b; x is [..., in]."""
    if x.shape[-1] != p.weight.shape[1]:
        raise ShapeMismatch(
            f"dense input dim {x.shape[-1]} != weight in-dim {p.weight.shape[1]}"
        )
    return x @ p.weight.T + p.bias


def dense_backward(p: DenseParams, x: np.ndarray, g_out: np.ndarray):
    """Return (g_weight, g_bias, g_x) for upstream gradient g_out."""
    if g_out.shape[-1] != p.weight.shape[0]:
        raise ShapeMismatch("dense gradient dim mismatch")
    x2 = x.reshape(-1, x.shape[-1])
    g2 = g_out.reshape(-1, g_out.shape[-1])
    g_w = g2.T @ x2
    g_b = g2.sum(axis=0)
    g_x = g_out @ p.weight
    return g_w, g_b, g_x


# ---------------------------------------------------------------------------
# causal temporal convolution

@dataclass
class TConvParams:
    kernels: np.ndarray  # [out_ch, in_ch, kernel_w]
    bias: np.ndarray     # [out_ch]


def init_tconv(rng: np.random.Generator, out_ch: int, in_ch: int, kernel_w: int) -> TConvParams:
    fan_in = in_ch * kernel_w
    limit = np.sqrt(6.0 / (fan_in + out_ch))
    return TConvParams(rng.uniform(-limit, limit, size=(out_ch, in_ch, kernel_w)), np.zeros(out_ch))


def _pad_causal(x: np.ndarray, kernel_w: int) -> np.ndarray:
    # left-pad by repeating the earliest frame: episode start has no history
    first = x[..., :1, :]
    reps = [1] * x.ndim
    reps[-2] = kernel_w - 1
    return np.concatenate([np.tile(first, reps), x], axis=-2)


def tconv_forward(p: TConvParams, x: np.ndarray) -> np.ndarray:
    """Causal conv over time: x is [..., time, in_ch] -> [..., time, out_ch].

    Output frame t depends only on input frames <= t; the left edge is padded
    with the earliest frame.
    """
    out_ch, in_ch, kw = p.kernels.shape
    if x.shape[-1] != in_ch:
        raise ShapeMismatch(f"tconv input channels {x.shape[-1]} != {in_ch}")
    t = x.shape[-2]
    xp = _pad_causal(x, kw)
    y = np.zeros(x.shape[:-2] + (t, out_ch))
    for k in range(kw):
        # kernel tap k looks back (kw-1-k) frames
        y += np.einsum("...tc,oc->...to", xp[..., k : k + t, :], p.kernels[:, :, k])
    return y + p.bias


def tconv_backward(p: TConvParams, x: np.ndarray, g_out: np.ndarray):
    """Return (g_kernels, g_bias, g_x)."""
    out_ch, in_ch, kw = p.kernels.shape
    t = x.shape[-2]
    shape = x.shape
    xp = _pad_causal(x, kw).reshape(-1, t + kw - 1, in_ch)
    g3 = g_out.reshape(-1, t, out_ch)
    g_k = np.zeros_like(p.kernels)
    g_xp = np.zeros_like(xp)
    for k in range(kw):
        g_k[:, :, k] = np.einsum("bto,btc->oc", g3, xp[:, k : k + t, :])
        g_xp[:, k : k + t, :] += np.einsum("bto,oc->btc", g3, p.kernels[:, :, k])
    g_b = g3.reshape(-1, out_ch).sum(axis=0)
    # fold the replicated-padding gradient back onto the first frame
    g_x = g_xp[:, kw - 1 :, :].copy()
    g_x[:, 0, :] += g_xp[:, : kw - 1, :].sum(axis=1)
    return g_k, g_b, g_x.reshape(shape)


# ---------------------------------------------------------------------------
# activations and loss

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, g_out: np.ndarray) -> np.ndarray:
    return g_out * (x > 0.0)


def mse_loss(pred: np.ndarray, target: np.ndarray, weights: np.ndarray | None = None):
    """Per-sample-weighted MSE.

    loss = sum_i w_i * ||pred_i - target_i||^2 / N, gradient w.r.t. pred.
    With all weights 1 this equals the unweighted loss exactly.
    """
    if pred.shape != target.shape:
        raise ShapeMismatch(f"loss shapes {pred.shape} vs {target.shape}")
    diff = pred - target
    n = pred.shape[0] if pred.ndim > 1 else 1
    if weights is None:
        loss = float(np.sum(diff * diff)) / n
        grad = 2.0 * diff / n
    else:
        w = np.asarray(weights, dtype=float)
        wb = w.reshape(w.shape + (1,) * (pred.ndim - w.ndim))
        loss = float(np.sum(wb * diff * diff)) / n
        grad = 2.0 * wb * diff / n
    return loss, grad


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> None:
    """Standard Adam with bias correction; updates params in place."""
    state.step += 1
    t = state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / (1.0 - state.beta1**t)
        v_hat = state.v[name] / (1.0 - state.beta2**t)
        params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# MLP container used by the behavior-cloned policy and fusion heads

@dataclass
class MLP:
    """Dense stack with ReLU between layers (linear output)."""

    layers: list  # list[DenseParams]

    @staticmethod
    def create(rng, sizes, zero_last: bool = False) -> "MLP":
        layers = []
        for i in range(len(sizes) - 1):
            zero = zero_last and i == len(sizes) - 2
            layers.append(init_dense(rng, sizes[i + 1], sizes[i], zero=zero))
        return MLP(layers)

    def forward(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        h = x
        for i, layer in enumerate(self.layers):
            z = dense_forward(layer, h)
            if cache is not None:
                cache.append((h, z))
            h = relu(z) if i < len(self.layers) - 1 else z
        return h

    def backward(self, cache: list, g_out: np.ndarray):
        """Return (grads dict keyed like params(), g_input)."""
        grads = {}
        g = g_out
        for i in reversed(range(len(self.layers))):
            h_in, z = cache[i]
            if i < len(self.layers) - 1:
                g = relu_backward(z, g)
            g_w, g_b, g = dense_backward(self.layers[i], h_in, g)
            grads[f"w{i}"] = g_w
            grads[f"b{i}"] = g_b
        return grads, g

    def params(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"w{i}"] = layer.weight
            out[f"b{i}"] = layer.bias
        return out

    def copy(self) -> "MLP":
        return MLP([DenseParams(l.weight.copy(), l.bias.copy()) for l in self.layers])


# ---------------------------------------------------------------------------
# finite-difference verification harness

def numeric_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of scalar f at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise relative error with an absolute floor on the denominator."""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradient_check(loss_fn, params: dict, h: float = 1e-6) -> float:
    """Compare loss_fn()'s analytic grads to finite differences.

    loss_fn returns (loss, grads dict over the same keys as params).
    Returns the max relative error over all parameters.
    """
    _, grads = loss_fn()
    worst = 0.0
    for name, p in params.items():
        numeric = numeric_gradient(lambda: loss_fn()[0], p, h)
        worst = max(worst, max_relative_error(grads[name], numeric))
    return worst
