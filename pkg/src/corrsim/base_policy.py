"""Scripted demonstrator and behavior-cloned base policy.

The demonstrator turns perceived geometry into an absolute waypoint
schedule; the base policy is a small dense network cloned from recorded
demonstrations.  Both emit 32-pose chunks spaced 0.1 s apart once per
second.  The network input is the perceived task features plus the last
two executed poses at 0.1 s spacing; its targets are the commanded chunk
expressed as offsets from the current pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .errors import DemoFailed, EmptyDataset
from .nn import MLP, AdamState, adam_step, dense_forward, mse_loss, relu
from .rng import stream

CHUNK_LEN = 32
CHUNK_DT = 0.1
BASE_PERIOD = 1.0
PROPRIO_POSES = 2
POSE_SCALE = np.array([5.0, 5.0, 1.0])   # x, y in meters are small; rescale
FEAT_SCALE = np.array([5.0, 5.0, 5.0, 1.0, 1.0, 1.0])
OBS_DIM = 6 + 3 * PROPRIO_POSES
HIDDEN = (64, 64)
OUT_DIM = 3 * CHUNK_LEN

EPISODE_LEN = {"flip": 12.5, "slot": 11.5}
# cloning epochs tuned per task; the slot schedule needs the tighter fit
BC_EPOCHS = {"flip": 8000, "slot": 8000}


# --- scripted demonstrator ---------------------------------------------------

def demo_waypoints(task: str, features: np.ndarray) -> list:
    """Absolute (t, x, y) waypoints from perceived geometry."""
    if task == "flip":
        e, g, w = features[0], features[1], features[2]
        return [
            (0.0, 0.10, 0.05),
            (1.2, e - 0.030, g + 0.015),
            (2.0, e - 0.025, g),
            (3.5, e + 0.020, g),
            (6.5, w + 0.005, 0.19),
            (7.5, w - 0.012, 0.06),
            (8.0, w + 0.002, 0.06),
            (9.4, w + 0.012, 0.06),
            (9.8, w + 0.012, 0.06),
            (10.4, w - 0.060, 0.06),
            (11.5, 0.12, 0.10),
        ]
    b, s1, s2 = features[0], features[1], features[2]
    return [
        (0.0, 0.10, 0.24),
        (1.5, b - 0.020, s1),
        (2.4, b + 0.005, s1),
        (2.9, b + 0.005, s1),
        (3.5, b - 0.004, s1),
        (5.5, b - 0.004, s2 + 0.010),
        (6.6, b - 0.004, s2),
        (7.2, b - 0.004, s2),
        (7.8, b + 0.005, s2),
        (8.2, b + 0.005, s2),
        (8.7, b + 0.003, s2),
        (9.0, b - 0.030, s2),
        (10.8, 0.12, s2 + 0.02),
    ]


def sample_waypoints(waypoints: list, t: float) -> np.ndarray:
    """Piecewise-linear (x, y, yaw) at time t; endpoints held."""
    if t <= waypoints[0][0]:
        _, x, y = waypoints[0]
        return np.array([x, y, 0.0])
    for (t0, x0, y0), (t1, x1, y1) in zip(waypoints, waypoints[1:]):
        if t <= t1:
            s = (t - t0) / (t1 - t0)
            return np.array([x0 + s * (x1 - x0), y0 + s * (y1 - y0), 0.0])
    _, x, y = waypoints[-1]
    return np.array([x, y, 0.0])


@dataclass
class ScriptedPolicy:
    """Demonstrator: waypoint schedule fixed at episode start.

    Waypoint coordinates get per-episode Gaussian jitter so repeated demos
    are not identical; the schedule itself is a pure function of the
    perceived features it was built from.
    """

    task: str
    noise: float = 0.0
    _waypoints: list | None = None

    def begin_episode(self, features: np.ndarray, rng: np.random.Generator) -> None:
        wps = demo_waypoints(self.task, features)
        if self.noise > 0.0:
            wps = [
                (t, x + rng.normal(0.0, self.noise), y + rng.normal(0.0, self.noise))
                for t, x, y in wps
            ]
        self._waypoints = wps

    def chunk(self, features: np.ndarray, pose_now: np.ndarray, pose_prev: np.ndarray,
              t: float) -> tuple:
        times = [t + CHUNK_DT * i for i in range(CHUNK_LEN)]
        poses = [sample_waypoints(self._waypoints, ti) for ti in times]
        return times, poses


# --- behavior-cloned policy ---------------------------------------------------

def build_base_obs(features: np.ndarray, pose_now: np.ndarray,
                   pose_prev: np.ndarray) -> np.ndarray:
    return np.concatenate([
        np.asarray(features) * FEAT_SCALE,
        np.asarray(pose_now) * POSE_SCALE,
        np.asarray(pose_prev) * POSE_SCALE,
    ])


@dataclass
class BasePolicy:
    task: str
    net: MLP
    loss_history: list = field(default_factory=list)

    def save(self, path) -> None:
        checkpoint.save_tensors(path, self.net.params(), meta={
            "kind": "base_policy", "task": self.task,
            "layers": len(self.net.layers),
            "loss_history": [float(v) for v in self.loss_history],
        })

    @staticmethod
    def load(path) -> "BasePolicy":
        tensors, meta = checkpoint.load_tensors(path)
        from .nn import DenseParams
        layers = [DenseParams(tensors[f"w{i}"], tensors[f"b{i}"])
                  for i in range(meta["layers"])]
        return BasePolicy(task=meta["task"], net=MLP(layers),
                          loss_history=list(meta.get("loss_history", [])))

    def chunk(self, features: np.ndarray, pose_now: np.ndarray, pose_prev: np.ndarray,
              t: float) -> tuple:
        return base_infer(self, features, pose_now, pose_prev, t)


def bc_pairs(episodes: list) -> tuple:
    """(X, Y) behavior-cloning matrices from recorded demo episodes.

    X rows are the stored base observations; Y rows are the commanded chunk
    minus the executed pose at the tick, rescaled.
    """
    xs, ys = [], []
    ticks_per_period = int(round(BASE_PERIOD / 0.02))
    for ep in episodes:
        for tick_idx, obs, chunk in ep.base_ticks:
            step = ep.steps[min(tick_idx * ticks_per_period, len(ep.steps) - 1)]
            offsets = (np.asarray(chunk) - step.executed) * POSE_SCALE
            xs.append(obs)
            ys.append(offsets.ravel())
    if not xs:
        raise EmptyDataset("no base ticks found in demonstrations")
    return np.stack(xs), np.stack(ys)


def fit_base(task: str, x: np.ndarray, y: np.ndarray, seed: int,
             epochs: int | None = None, lr: float = 1e-3, batch_size: int = 128,
             net: MLP | None = None, freeze_first: bool = False) -> BasePolicy:
    """Minibatch Adam on behavior-cloning pairs.

    Pass an existing net to continue training it (a copy is trained);
    freeze_first keeps the feature layer fixed during finetuning.
    """
    if x.shape[0] == 0:
        raise EmptyDataset("behavior cloning requires at least one sample")
    if epochs is None:
        epochs = BC_EPOCHS[task]
    rng = stream(seed, "train-base", task)
    if net is None:
        net = MLP.create(rng, [OBS_DIM, *HIDDEN, OUT_DIM])
    else:
        net = net.copy()
    adam = AdamState(lr=lr)
    n = x.shape[0]
    history = []
    for epoch in range(epochs):
        # step decay sharpens the fit once the coarse schedule is learned
        adam.lr = lr * (0.3 ** int(3 * epoch / epochs))
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            cache = []
            pred = net.forward(x[idx], cache)
            loss, g = mse_loss(pred, y[idx])
            grads, _ = net.backward(cache, g)
            if freeze_first:
                grads["w0"] = np.zeros_like(grads["w0"])
                grads["b0"] = np.zeros_like(grads["b0"])
            adam_step(adam, net.params(), grads)
            total += loss * len(idx)
        history.append(total / n)
    return BasePolicy(task=task, net=net, loss_history=history)


def train_base(episodes: list, seed: int, epochs: int | None = None, lr: float = 1e-3,
               batch_size: int = 128) -> BasePolicy:
    """Clone the demonstrator on its commanded chunks."""
    if not episodes:
        raise EmptyDataset("behavior cloning requires at least one episode")
    x, y = bc_pairs(episodes)
    return fit_base(episodes[0].task, x, y, seed, epochs, lr, batch_size)


def base_infer(policy: BasePolicy, features: np.ndarray, pose_now: np.ndarray,
               pose_prev: np.ndarray, t: float) -> tuple:
    """Predict the next 32-pose chunk with timestamps t + 0.1 * i."""
    obs = build_base_obs(features, pose_now, pose_prev)
    out = policy.net.forward(obs[None, :])[0]
    offsets = out.reshape(CHUNK_LEN, 3) / POSE_SCALE
    poses = np.asarray(pose_now) + offsets
    times = [t + CHUNK_DT * i for i in range(CHUNK_LEN)]
    return times, [poses[i] for i in range(CHUNK_LEN)]


def trunk_features(policy: BasePolicy, features: np.ndarray, pose_now: np.ndarray,
                   pose_prev: np.ndarray) -> np.ndarray:
    """First-layer activations; frozen feature input for the residual."""
    obs = build_base_obs(features, pose_now, pose_prev)
    return relu(dense_forward(policy.net.layers[0], obs))


# --- demonstration collection ---------------------------------------------------

def scripted_demo(task: str, scenario_id: str, seed: int, noise: float = 0.0015,
                  max_retries: int = 20):
    """One successful scripted demonstration episode (retries on failure)."""
    from . import harness  # runtime import: harness also imports this module

    for attempt in range(max_retries):
        ep = harness.run_episode(
            task=task, scenario_id=scenario_id, seed=seed + 1000 * attempt,
            policy=ScriptedPolicy(task=task, noise=noise), mode="Demo",
            obs_noise=noise * 2.0 / 3.0,
        )
        if ep.outcome == "success":
            return ep
    raise DemoFailed(f"{task}/{scenario_id}: no success in {max_retries} attempts")


def collect_demos(task: str, count: int, seed: int, noise: float = 0.0015) -> list:
    """Round-robin successful demos over the demo scenario set."""
    from .scenarios import scenario_ids

    ids = scenario_ids(task, "demo")
    rng = stream(seed, "demos", task)
    return [
        scripted_demo(task, ids[i % len(ids)], int(rng.integers(1 << 31)), noise)
        for i in range(count)
    ]
