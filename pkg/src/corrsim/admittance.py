"""Decoupled 6-axis admittance controller and setpoint command buffer.

Per axis the controller integrates

    M * a + D * v + K * (x - x_ref) = f_ext - f_target

with semi-implicit Euler (velocity first, then position).  f_ext and
f_target are both expressed as wrenches acting on the tool: when the felt
wrench equals the target wrench, the spring term alone drives tracking.
Rotation is integrated on the planar yaw coordinate; roll/pitch references
are zero throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBuffer, NonFiniteState
from .se3 import Pose, Wrench, planar_embed, planar_project, wrap_angle

# axis order: tx, ty, tz, rx, ry, yaw
N_AXES = 6


@dataclass
class AdmittanceParams:
    mass: np.ndarray      # kg / kg*m^2
    damping: np.ndarray   # N*s/m / N*m*s/rad
    stiffness: np.ndarray  # N/m / N*m/rad

    @staticmethod
    def default() -> "AdmittanceParams":
        # K = 1000 N/m translation; rotational values and masses are tuning
        # choices for stable 50 Hz commands with 500 Hz substeps.
        k = np.array([1000.0, 1000.0, 1000.0, 20.0, 20.0, 20.0])
        m = np.array([2.0, 2.0, 2.0, 0.05, 0.05, 0.05])
        d = 2.2 * np.sqrt(k * m)
        return AdmittanceParams(m, d, k)

    def validate(self) -> None:
        if not (np.all(self.mass > 0) and np.all(self.damping > 0) and np.all(self.stiffness >= 0)):
            raise ValueError("admittance params require M > 0, D > 0, K >= 0")

    def copy(self) -> "AdmittanceParams":
        return AdmittanceParams(self.mass.copy(), self.damping.copy(), self.stiffness.copy())


@dataclass
class AdmittanceState:
    coords: np.ndarray    # [tx, ty, tz, rx, ry, yaw]
    velocity: np.ndarray  # 6-vector

    @staticmethod
    def at(x: float, y: float, yaw: float = 0.0) -> "AdmittanceState":
        c = np.zeros(N_AXES)
        c[0], c[1], c[5] = x, y, yaw
        return AdmittanceState(c, np.zeros(N_AXES))

    @property
    def pose(self) -> Pose:
        p = planar_embed(self.coords[0], self.coords[1], self.coords[5])
        p.translation[2] = self.coords[2]
        return p

    def copy(self) -> "AdmittanceState":
        return AdmittanceState(self.coords.copy(), self.velocity.copy())


def step_axes(
    state: AdmittanceState,
    params: AdmittanceParams,
    ref_coords: np.ndarray,
    f_target: np.ndarray,
    f_ext: np.ndarray,
    dt: float,
) -> None:
    """In-place semi-implicit Euler step on the 6 axis coordinates."""
    q, v = state.coords, state.velocity
    err = q - ref_coords
    err[5] = wrap_angle(err[5])
    acc = (f_ext - f_target - params.damping * v - params.stiffness * err) / params.mass
    v += acc * dt
    q += v * dt
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise NonFiniteState("admittance state diverged")


def admittance_step(
    state: AdmittanceState,
    params: AdmittanceParams,
    ref_pose: Pose,
    target_wrench: Wrench,
    external_wrench: Wrench,
    dt: float,
) -> AdmittanceState:
    """Typed single step; returns a new state."""
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"dt {dt} outside (0, 0.01]")
    params.validate()
    x, y, yaw = planar_project(ref_pose)
    ref = np.array([x, y, ref_pose.translation[2], 0.0, 0.0, yaw])
    out = state.copy()
    step_axes(out, params, ref, target_wrench.as_array(), external_wrench.as_array(), dt)
    return out


def set_stiffness(params: AdmittanceParams, k_new) -> None:
    """Replace the stiffness axis-wise; scalar applies to every axis."""
    k = np.asarray(k_new, dtype=float)
    params.stiffness = np.full(N_AXES, float(k)) if k.ndim == 0 else k.copy()


@dataclass
class Setpoint:
    time: float
    x: float
    y: float
    yaw: float
    wrench: np.ndarray  # 6-vector, tool-frame target


@dataclass
class CommandBuffer:
    setpoints: list = field(default_factory=list)
    _cursor: int = 0

    def clear(self) -> None:
        self.setpoints = []
        self._cursor = 0

    def push_chunk(self, times, poses_xy_yaw, wrenches) -> None:
        """Append a chunk; newer chunks overwrite overlapping future setpoints."""
        t0 = times[0]
        while self.setpoints and self.setpoints[-1].time >= t0:
            self.setpoints.pop()
        self._cursor = min(self._cursor, max(len(self.setpoints) - 1, 0))
        prev = self.setpoints[-1].time if self.setpoints else -math.inf
        for t, p, w in zip(times, poses_xy_yaw, wrenches):
            if t <= prev:
                raise ValueError("setpoint timestamps must be strictly increasing")
            prev = t
            self.setpoints.append(Setpoint(t, p[0], p[1], p[2], np.asarray(w, dtype=float)))

    def resample(self, now: float):
        """Interpolated (ref coords [x, y, yaw], target wrench 6-vector) at `now`.

        Translation and yaw are linearly interpolated between bracketing
        setpoints (yaw by shortest path); the wrench is zero-order held from
        the earlier setpoint.  Before the first / after the last setpoint the
        endpoint is held.
        """
        sp = self.setpoints
        if not sp:
            raise EmptyBuffer("resample on empty command buffer")
        i = min(self._cursor, len(sp) - 1)
        while i > 0 and sp[i].time > now:
            i -= 1
        while i + 1 < len(sp) and sp[i + 1].time <= now:
            i += 1
        self._cursor = i
        a = sp[i]
        if now <= a.time or i + 1 >= len(sp):
            return np.array([a.x, a.y, a.yaw]), a.wrench
        b = sp[i + 1]
        s = (now - a.time) / (b.time - a.time)
        x = a.x + s * (b.x - a.x)
        y = a.y + s * (b.y - a.y)
        yaw = wrap_angle(a.yaw + s * wrap_angle(b.yaw - a.yaw))
        return np.array([x, y, yaw]), a.wrench


def clear_buffer(buffer: CommandBuffer) -> None:
    buffer.clear()
