"""Scripted corrector standing in for a human operator.

The corrector watches the true world state (which the policies never see)
and applies force through the compliant interface.  Two interaction styles:

* OnPolicyDelta -- the base policy keeps executing; the corrector nudges
  the tool with bounded forces, producing delta corrections on top of the
  base trajectory.
* TakeOver -- the command buffer is cleared and stiffness drops to zero;
  a hand-spring drags the tool through a local recovery plan, then control
  returns to the base policy.

Triggers use the true geometry: insertion blocked above the gap, push
force out of the seating band, belt misaligned at a slot.  Engagement and
release are debounced by a hysteresis interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import world as wd

HYSTERESIS = 0.1      # s a trigger must persist before engaging / releasing
MAX_DELTA_FORCE = 20.0
MAX_HAND_FORCE = 30.0
HAND_K = 3000.0
HAND_D = 110.0
PUSH_TARGET = 10.5    # N, middle of the seating band
PUSH_ALPHA = 0.2      # integral trim per tick; slow enough to avoid limit cycles
PUSH_P = 2.0          # N per N of force error; immediate reaction to excursions
PUSH_DAMP = 60.0      # N per m/s, quenches force overshoot at contact
PUSH_APPROACH = 4.0   # N feed while not yet touching the face
SPRING_GAIN = 2500.0  # N/m toward the true feature during delta corrections


@dataclass
class Action:
    human_force: np.ndarray
    correction: bool = False
    clear_buffer: bool = False
    stiffness: str | None = None  # None | "zero" | "restore"

    @staticmethod
    def idle() -> "Action":
        return Action(np.zeros(6))


@dataclass
class Intervener:
    style: str                      # "OnPolicyDelta" | "TakeOver"
    engaged: bool = False
    active_trigger: str | None = None
    _pending: str | None = None
    _pending_since: float = 0.0
    _release_since: float | None = None
    takeover_target: np.ndarray | None = None
    corrections: int = field(default=0)
    push_f: float = 0.0

    def update(self, w: wd.World, t: float, pose: np.ndarray, velocity: np.ndarray,
               measured: np.ndarray) -> Action:
        trigger = _trigger(w, pose, measured)
        if not self.engaged:
            if trigger is None:
                self._pending = None
                return Action.idle()
            if trigger != self._pending:
                self._pending, self._pending_since = trigger, t
                return Action.idle()
            if t - self._pending_since < HYSTERESIS:
                return Action.idle()
            self.engaged = True
            self.active_trigger = trigger
            self._release_since = None
            self.corrections += 1
            self.push_f = 0.0
            if self.style == "TakeOver":
                self.takeover_target = _takeover_target(w, self.active_trigger, pose)
                return Action(self._force(w, pose, velocity, measured),
                              correction=True, clear_buffer=True, stiffness="zero")
            return Action(self._force(w, pose, velocity, measured), correction=True)

        if _resolved(w, self.active_trigger):
            if self._release_since is None:
                self._release_since = t
            if t - self._release_since >= HYSTERESIS:
                self.engaged = False
                self.active_trigger = None
                self._pending = None
                restore = "restore" if self.style == "TakeOver" else None
                return Action(np.zeros(6), correction=False, stiffness=restore)
        else:
            self._release_since = None
        return Action(self._force(w, pose, velocity, measured), correction=True)

    def _force(self, w: wd.World, pose: np.ndarray, velocity: np.ndarray,
               measured: np.ndarray) -> np.ndarray:
        if self.style == "TakeOver":
            return _hand_spring(self, w, pose, velocity, measured)
        return _delta_force(self, w, self.active_trigger, pose, velocity, measured)

    def _push_force(self, measured_fx: float, vx: float) -> float:
        """Gentle approach until contact, then integral force trimming."""
        if measured_fx < 0.5:
            self.push_f = PUSH_APPROACH
            return float(np.clip(self.push_f - PUSH_DAMP * vx,
                                 -MAX_DELTA_FORCE, MAX_DELTA_FORCE))
        err = PUSH_TARGET - measured_fx
        self.push_f += PUSH_ALPHA * err
        self.push_f = float(np.clip(self.push_f, -MAX_DELTA_FORCE, MAX_DELTA_FORCE))
        return float(np.clip(self.push_f + PUSH_P * err - PUSH_DAMP * vx,
                             -MAX_DELTA_FORCE, MAX_DELTA_FORCE))


# --- triggers and resolution ---------------------------------------------------

def _trigger(w: wd.World, pose: np.ndarray, measured: np.ndarray) -> str | None:
    x, y = pose[0], pose[1]
    fx = measured[0]
    if w.task == "flip":
        if not w.stage1_reached and fx > 0.5 and y > w.geom["gap_top"]:
            return "insertion"
        if w.inserted and not w.rotated and w.time > 6.2:
            return "lift"  # rotation stalled short of the leaning angle
        if w.leaning and not w.seated and y < 0.10:
            in_contact = fx > 0.5
            out_of_band = fx < wd.FLIP_HOLD_FORCE + 1.0 or fx > wd.FLIP_BREAK_FORCE - 1.0
            if in_contact and out_of_band:
                return "push"
            if not in_contact and w.time > 9.0:
                return "push"  # push phase stalled without contact
        return None
    g = w.geom
    near_zone = 0.02  # misalignment counts only near the active slot
    if not w.engaged1:
        d1 = abs(y - g["slot1_y"])
        if (fx > 0.5 and wd.SLOT1_TOL < d1 <= near_zone) or w.time > 4.2:
            return "slot1"
        return None
    if not w.engaged2 and not w.belt_slipped:
        d2 = abs(y - g["slot2_y"])
        if (fx > 0.5 and wd.SLOT2_TOL < d2 <= near_zone) or w.time > 8.6:
            return "slot2"
    return None


def _resolved(w: wd.World, trigger: str) -> bool:
    if trigger == "insertion":
        return w.stage1_reached
    if trigger == "lift":
        return w.rotated or not w.inserted
    if trigger == "push":
        return w.seated or w.overpushed
    if trigger == "slot1":
        return w.engaged1
    if trigger == "slot2":
        return w.engaged2
    return True


# --- delta-style corrective forces ----------------------------------------------

def _delta_force(iv: "Intervener", w: wd.World, trigger: str, pose: np.ndarray,
                 velocity: np.ndarray, measured: np.ndarray) -> np.ndarray:
    f = np.zeros(6)
    x, y = pose[0], pose[1]
    if trigger == "insertion":
        f[1] = np.clip(SPRING_GAIN * (w.geom["gap_center"] - y),
                       -MAX_DELTA_FORCE, MAX_DELTA_FORCE)
        f[0] = 3.0  # gentle forward assist under the edge
    elif trigger == "lift":
        apex = _lift_apex(w)
        for axis in (0, 1):
            f[axis] = np.clip(SPRING_GAIN * (apex[axis] - pose[axis]),
                              -MAX_DELTA_FORCE, MAX_DELTA_FORCE)
    elif trigger == "push":
        f[0] = iv._push_force(measured[0], float(velocity[0]))
    elif trigger == "slot1":
        f[1] = np.clip(SPRING_GAIN * (w.geom["slot1_y"] - y), -MAX_DELTA_FORCE, MAX_DELTA_FORCE)
    elif trigger == "slot2":
        f[1] = np.clip(SPRING_GAIN * (w.geom["slot2_y"] - y), -MAX_DELTA_FORCE, MAX_DELTA_FORCE)
    return f


# --- takeover hand-spring --------------------------------------------------------

def _lift_apex(w: wd.World) -> np.ndarray:
    # high on the wall face: guarantees the leaning angle from any arm length
    return np.array([w.geom["hinge_x"] - wd.SLAB_THICK + 0.005, 0.19])


def _takeover_target(w: wd.World, trigger: str, pose: np.ndarray) -> np.ndarray:
    g = w.geom
    if trigger == "insertion":
        return np.array([g["edge_x"] + 0.02, g["gap_center"]])
    if trigger == "lift":
        return _lift_apex(w)
    if trigger == "push":
        return np.array([g["hinge_x"] - wd.SLAB_THICK + 0.01, pose[1]])
    if trigger == "slot1":
        return np.array([g["board_x"] + 0.005, g["slot1_y"]])
    return np.array([g["board_x"] + 0.005, g["slot2_y"]])


def _hand_spring(iv: Intervener, w: wd.World, pose: np.ndarray, velocity: np.ndarray,
                 measured: np.ndarray) -> np.ndarray:
    f = np.zeros(6)
    if iv.active_trigger == "push":
        # pure force regulation while stiffness is zero
        f[0] = iv._push_force(measured[0], float(velocity[0]))
        f[1] = np.clip(HAND_K * (iv.takeover_target[1] - pose[1]) - HAND_D * velocity[1],
                       -MAX_HAND_FORCE, MAX_HAND_FORCE)
        return f
    for axis in (0, 1):
        f[axis] = np.clip(
            HAND_K * (iv.takeover_target[axis] - pose[axis]) - HAND_D * velocity[axis],
            -MAX_HAND_FORCE, MAX_HAND_FORCE)
    return f
