"""Residual delta policy with force input and force output.

The residual runs at 50 Hz on top of the 1 Hz base policy.  Its inputs are
the frozen trunk features of the base network, a short executed-pose
history, a causal convolution encoding of the recent measured wrenches and
(optionally) the upcoming base setpoints.  It outputs, for each of the next
5 frames, a 9-dim pose delta (6-D rotation offset from identity plus
translation) and a 6-dim target wrench in the sensor convention.

The final fusion layer is zero-initialized, so an untrained residual is an
exact no-op: zero rotation offset decodes to the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .base_policy import POSE_SCALE, BasePolicy, trunk_features
from .errors import EmptyDataset
from .nn import (MLP, AdamState, TConvParams, adam_step, init_tconv, mse_loss,
                 relu, relu_backward, tconv_backward, tconv_forward)
from .rng import stream
from .se3 import Rot6D, rot6d_decode

HORIZON = 5
PROPRIO_HIST = 5
FORCE_HIST = 25
FORCE_SCALE = 0.1          # wrenches in N; network sees N / 10
FORCE_CLIP = 1.25          # saturate encoded wrenches so unseen force levels
                           # fall back to the nearest trained regime
DELTA_GAIN = 10.0          # extra gain on translation targets so millimeter
                           # pose deltas are not drowned out by the wrench loss
TRUNK_DIM = 64
FORCE_CH = 8
KERNEL_W = 5
FUSION_HIDDEN = (64, 64)
FRAME_DIM = 15             # 6 rot offset + 3 translation + 6 wrench
MAX_TRANSL = 0.03          # m per frame
MAX_YAW = np.radians(20.0)

_IDENTITY6 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass
class ResidualPolicy:
    task: str
    force_enabled: bool
    with_base_action: bool
    tconv1: TConvParams
    tconv2: TConvParams
    fusion: MLP
    loss_history: list = field(default_factory=list)
    # deploy-time clamp on the predicted target wrench, per axis; the policy
    # never commands a contact force outside what its corrections demonstrated
    wrench_lo: np.ndarray | None = None
    wrench_hi: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        d = TRUNK_DIM + 3 * PROPRIO_HIST + FORCE_CH
        if self.with_base_action:
            d += 3 * HORIZON
        return d

    def params(self) -> dict:
        out = {f"fusion_{k}": v for k, v in self.fusion.params().items()}
        out.update({
            "tconv1_k": self.tconv1.kernels, "tconv1_b": self.tconv1.bias,
            "tconv2_k": self.tconv2.kernels, "tconv2_b": self.tconv2.bias,
        })
        return out

    def save(self, path) -> None:
        checkpoint.save_tensors(path, self.params(), meta={
            "kind": "residual_policy", "task": self.task,
            "force_enabled": self.force_enabled,
            "with_base_action": self.with_base_action,
            "fusion_layers": len(self.fusion.layers),
            "loss_history": [float(v) for v in self.loss_history],
            "wrench_lo": None if self.wrench_lo is None else [float(v) for v in self.wrench_lo],
            "wrench_hi": None if self.wrench_hi is None else [float(v) for v in self.wrench_hi],
        })

    @staticmethod
    def load(path) -> "ResidualPolicy":
        from .nn import DenseParams
        tensors, meta = checkpoint.load_tensors(path)
        fusion = MLP([
            DenseParams(tensors[f"fusion_w{i}"], tensors[f"fusion_b{i}"])
            for i in range(meta["fusion_layers"])
        ])
        return ResidualPolicy(
            task=meta["task"], force_enabled=meta["force_enabled"],
            with_base_action=meta["with_base_action"],
            tconv1=TConvParams(tensors["tconv1_k"], tensors["tconv1_b"]),
            tconv2=TConvParams(tensors["tconv2_k"], tensors["tconv2_b"]),
            fusion=fusion, loss_history=list(meta.get("loss_history", [])),
            wrench_lo=_maybe_array(meta.get("wrench_lo")),
            wrench_hi=_maybe_array(meta.get("wrench_hi")),
        )


def _maybe_array(values) -> np.ndarray | None:
    return None if values is None else np.asarray(values, dtype=float)


def create_residual(task: str, seed: int, force_enabled: bool = True,
                    with_base_action: bool | None = None) -> ResidualPolicy:
    """Fresh residual; final layer zero so the initial policy is a no-op."""
    if with_base_action is None:
        with_base_action = task == "flip"
    rng = stream(seed, "residual-init", task)
    tc1 = init_tconv(rng, FORCE_CH, 6, KERNEL_W)
    tc2 = init_tconv(rng, FORCE_CH, FORCE_CH, KERNEL_W)
    in_dim = TRUNK_DIM + 3 * PROPRIO_HIST + FORCE_CH
    if with_base_action:
        in_dim += 3 * HORIZON
    fusion = MLP.create(rng, [in_dim, *FUSION_HIDDEN, HORIZON * FRAME_DIM], zero_last=True)
    return ResidualPolicy(task=task, force_enabled=force_enabled,
                          with_base_action=with_base_action,
                          tconv1=tc1, tconv2=tc2, fusion=fusion)


# --- observation assembly -------------------------------------------------------

def _force_input(policy: ResidualPolicy, force_hist: np.ndarray) -> np.ndarray:
    f = np.clip(np.asarray(force_hist, dtype=float) * FORCE_SCALE,
                -FORCE_CLIP, FORCE_CLIP)
    if not policy.force_enabled:
        f = np.zeros_like(f)
    return f


def _encode_force(policy: ResidualPolicy, f: np.ndarray, cache: dict | None = None):
    z1 = tconv_forward(policy.tconv1, f)
    h1 = relu(z1)
    z2 = tconv_forward(policy.tconv2, h1)
    if cache is not None:
        cache.update(f=f, z1=z1, h1=h1, z2=z2)
    return z2[..., -1, :]


def residual_input(policy: ResidualPolicy, base: BasePolicy, features, pose_now,
                   pose_prev, proprio_hist, force_hist, base_next,
                   cache: dict | None = None) -> np.ndarray:
    """Assemble the fusion input vector (batched over leading axes)."""
    trunk = trunk_features(base, features, pose_now, pose_prev)
    rel = (np.asarray(proprio_hist) - np.asarray(pose_now)) * POSE_SCALE
    parts = [trunk, rel.reshape(*rel.shape[:-2], -1),
             _encode_force(policy, _force_input(policy, force_hist), cache)]
    if policy.with_base_action:
        b = (np.asarray(base_next) - np.asarray(pose_now)) * POSE_SCALE
        parts.append(b.reshape(*b.shape[:-2], -1))
    return np.concatenate(parts, axis=-1)


def decode_output(policy: ResidualPolicy, out: np.ndarray) -> tuple:
    """Raw 75-vector -> (deltas [5, 3] as x, y, yaw; wrenches [5, 6])."""
    frames = out.reshape(HORIZON, FRAME_DIM)
    deltas = np.zeros((HORIZON, 3))
    wrenches = np.zeros((HORIZON, 6))
    for j in range(HORIZON):
        rot = rot6d_decode(Rot6D(_IDENTITY6 + frames[j, :6])).matrix
        yaw = np.arctan2(rot[1, 0], rot[0, 0])
        t = frames[j, 6:9] / (POSE_SCALE * DELTA_GAIN)
        deltas[j] = [
            np.clip(t[0], -MAX_TRANSL, MAX_TRANSL),
            np.clip(t[1], -MAX_TRANSL, MAX_TRANSL),
            np.clip(yaw, -MAX_YAW, MAX_YAW),
        ]
        if policy.force_enabled:
            w = frames[j, 9:15] / FORCE_SCALE
            if policy.wrench_lo is not None:
                w = np.clip(w, policy.wrench_lo, policy.wrench_hi)
            wrenches[j] = w
    return deltas, wrenches


def residual_infer(policy: ResidualPolicy, base: BasePolicy, features, pose_now,
                   pose_prev, proprio_hist, force_hist, base_next) -> tuple:
    """Predict (deltas [5, 3], target wrenches [5, 6]) for the next 5 frames."""
    x = residual_input(policy, base, features, pose_now, pose_prev,
                       proprio_hist, force_hist, base_next)
    out = policy.fusion.forward(x[None, :])[0]
    return decode_output(policy, out)


# --- training --------------------------------------------------------------------

def _scaled_target(target: np.ndarray, force_enabled: bool) -> np.ndarray:
    t = np.array(target, dtype=float)
    t[..., 6:9] *= POSE_SCALE * DELTA_GAIN
    t[..., 9:15] *= FORCE_SCALE if force_enabled else 0.0
    return t.reshape(*t.shape[:-2], -1)


CONTEXT_DROPOUT = 0.5      # fraction of samples whose pose-context channels
                           # are zeroed per batch; without this the network
                           # reads the correction offset straight out of the
                           # pose history and never consults the wrench


def train_residual(base: BasePolicy, samples: list, seed: int,
                   force_enabled: bool = True, with_base_action: bool | None = None,
                   epochs: int = 60, lr: float = 1e-3, batch_size: int = 128,
                   policy: ResidualPolicy | None = None,
                   context_dropout: float = CONTEXT_DROPOUT) -> ResidualPolicy:
    """Weighted-MSE training on labeled correction samples.

    The base trunk stays frozen; only the force encoder and fusion layers
    update.  Pass an existing policy to finetune instead of starting fresh.
    """
    if not samples:
        raise EmptyDataset("residual training requires labeled samples")
    task = base.task
    if policy is None:
        policy = create_residual(task, seed, force_enabled, with_base_action)
    rng = stream(seed, "train-residual", task, str(force_enabled))

    pose_now = np.stack([s.executed_now for s in samples])
    trunk = _batch_trunk(base, samples)
    rel = (np.stack([s.proprio_hist for s in samples]) - pose_now[:, None, :]) * POSE_SCALE
    rel = rel.reshape(len(samples), -1)
    forces = _force_input(policy, np.stack([s.force_hist for s in samples]))
    base_rel = None
    if policy.with_base_action:
        base_rel = (np.stack([s.base_next for s in samples]) - pose_now[:, None, :])
        base_rel = (base_rel * POSE_SCALE).reshape(len(samples), -1)
    raw_targets = np.stack([s.target for s in samples])
    if policy.force_enabled:
        # demonstrated target-wrench range, with the outlier tails trimmed
        label_w = raw_targets[..., 9:15].reshape(-1, 6)
        policy.wrench_lo = np.percentile(label_w, 1.0, axis=0)
        policy.wrench_hi = np.percentile(label_w, 99.0, axis=0)
    targets = _scaled_target(raw_targets, policy.force_enabled)
    weights = np.array([s.weight for s in samples])

    adam = AdamState(lr=lr)
    n = len(samples)
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            rel_b = rel[idx]
            base_b = None if base_rel is None else base_rel[idx]
            if context_dropout > 0.0:
                mask = rng.random(len(idx)) < context_dropout
                rel_b = np.where(mask[:, None], 0.0, rel_b)
                if base_b is not None:
                    base_b = np.where(mask[:, None], 0.0, base_b)
            loss, grads = _loss_and_grads(
                policy, trunk[idx], rel_b, forces[idx], base_b,
                targets[idx], weights[idx])
            adam_step(adam, policy.params(), grads)
            total += loss * len(idx)
        history.append(total / n)
    policy.loss_history = policy.loss_history + history
    return policy


def _batch_trunk(base: BasePolicy, samples: list) -> np.ndarray:
    out = np.empty((len(samples), TRUNK_DIM))
    for i, s in enumerate(samples):
        out[i] = trunk_features(base, s.obs, s.executed_now, s.proprio_hist[0])
    return out


def _loss_and_grads(policy, trunk, rel, forces, base_rel, targets, weights):
    cache = {}
    enc = _encode_force(policy, forces, cache)
    parts = [trunk, rel, enc]
    if base_rel is not None:
        parts.append(base_rel)
    x = np.concatenate(parts, axis=-1)
    mlp_cache = []
    pred = policy.fusion.forward(x, mlp_cache)
    loss, g = mse_loss(pred, targets, weights)
    fusion_grads, g_x = policy.fusion.backward(mlp_cache, g)
    grads = {f"fusion_{k}": v for k, v in fusion_grads.items()}
    lo = trunk.shape[-1] + rel.shape[-1]
    g_enc = g_x[:, lo:lo + FORCE_CH]
    g_z2 = np.zeros_like(cache["z2"])
    g_z2[..., -1, :] = g_enc
    gk2, gb2, g_h1 = tconv_backward(policy.tconv2, cache["h1"], g_z2)
    g_z1 = relu_backward(cache["z1"], g_h1)
    gk1, gb1, _ = tconv_backward(policy.tconv1, cache["f"], g_z1)
    grads.update(tconv1_k=gk1, tconv1_b=gb1, tconv2_k=gk2, tconv2_b=gb2)
    return loss, grads
