"""Deterministic planar quasi-static contact simulator.

Two task analogs are provided:

* ``flip`` -- a slab (book) lying on a shelf must be entered below its edge,
  rotated up against a wall, and pushed with a sustained force inside a band
  so it stands on its own.  Perception reports the insertion gap and the
  wall position with per-scenario biases; contact stiffness varies per
  scenario, so the push force cannot be inferred from positions alone.
* ``slot`` -- a belt held by the tool must engage two slots on a vertical
  board.  The second slot's height is visually ambiguous (per-scenario bias
  of a few millimeters) while chamfered ridges give a tactile cue toward
  the true slot once contact is made.

Objects are single-DOF and quasi-static: contacts are penalty springs with
damping (normal force clamped >= 0) plus Coulomb friction capped at
mu * normal.  The measured wrench returned by ``step`` follows the sensor
convention: minus the sum of contact wrenches acting on the tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, UnknownScenario
from .rng import stream
from .scenarios import Scenario, get_scenario
from .se3 import Pose, Wrench, planar_project

# --- shared plant constants (configuration, not claims) --------------------

SUBSTEP_DT = 0.002          # 500 Hz
TIMEOUT_S = 30.0

CONTACT_DAMPING = 50.0      # N*s/m
FRICTION_MU = 0.6
DEFAULT_CONTACT_K = 5000.0  # N/m
PROPRIO_OFFSET_STD = 0.003  # m, per-episode pose readout calibration error

# flip geometry
SHELF_EDGE_X = 0.155
SLAB_LEN = 0.12
SLAB_THICK = 0.02
GAP_HALF = 0.003            # insertion gap half-height; center varies per scenario
DEFAULT_GAP_CENTER = 0.003
ROTATED_ANGLE = math.radians(80.0)
LEAN_ANGLE = math.radians(82.0)
ENGAGE_CAP = math.radians(84.0)
FLIP_HOLD_FORCE = 8.0       # N, minimum sustained push to seat the slab
FLIP_BREAK_FORCE = 13.0     # N, above this the slab topples over the wall
FLIP_HOLD_TIME = 0.5        # s
FLIP_BREAK_TIME = 0.30      # s of sustained over-force before the slab topples
SLAB_FALL_RATE = 3.0        # rad/s when unsupported
SLAB_LOAD_SHARE = 0.7       # fraction of slab weight carried by the tool
LEAN_FACE_TOP = 0.125       # tool only contacts the leaning face below this height

# slot geometry
SLOT_FACE_MU = 0.1
SLOT_CHAMFER = 0.08         # wedge coefficient steering toward the slot
SLOT1_TOL = 0.0025          # m alignment tolerance, first slot
SLOT2_TOL = 0.0015
CHAMFER_ZONE = 0.007        # tactile cue reaches this far from slot center
SLOT_SEAT_DEPTH = 0.004     # recess depth where the belt seats
SLOT_ENGAGE_DEPTH = 0.002
BELT_SLACK = 0.04           # m of travel before tension builds
BELT_K = 150.0              # N/m of stretch
TENSION_LO = 5.0            # N release band
TENSION_HI = 9.0
BELT_PULL_SHARE = 0.3       # fraction of tension pulling the tool boardward

FLIP_FAILURES = ("missed_insertion", "incomplete_flipping", "overpush", "timeout")
SLOT_FAILURES = ("missed_first_slot", "missed_second_slot", "tension_out_of_band", "timeout")


@dataclass
class ContactParams:
    stiffness: float = DEFAULT_CONTACT_K
    damping: float = CONTACT_DAMPING
    mu: float = FRICTION_MU

    def __post_init__(self):
        if not (self.stiffness > 0 and self.damping >= 0 and self.mu >= 0):
            raise ValueError("contact params require k_c > 0, d_c >= 0, mu >= 0")


@dataclass
class StageStatus:
    stage: int                      # 0..3 completed stages
    flags: tuple                    # per-stage completion
    outcome: str | None             # "success" | failure label | None while running


@dataclass
class World:
    task: str
    scenario: Scenario
    seed: int
    contact: ContactParams
    time: float = 0.0
    contacts: list = field(default_factory=list)  # last-step contact report
    # perception (fixed at reset)
    perc: dict = field(default_factory=dict)
    # pose readout calibration error: policies see poses through this offset
    proprio_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # flip state
    theta: float = 0.0
    inserted: bool = False
    stage1_reached: bool = False
    rotated: bool = False
    leaning: bool = False
    seated: bool = False
    overpushed: bool = False
    hold_timer: float = 0.0
    break_timer: float = 0.0
    # slot state
    engaged1: bool = False
    engaged2: bool = False
    belt_slipped: bool = False
    engage_tension: float = 0.0
    tension: float = 0.0
    released: bool = False
    release_ok: bool = False
    # geometry resolved from scenario
    geom: dict = field(default_factory=dict)


def reset(task: str, scenario_id: str, seed: int, obs_noise: float = 0.0) -> World:
    """Deterministic initial world for (task, scenario, seed)."""
    sc = get_scenario(task, scenario_id)
    if sc.task != task:
        raise UnknownScenario(f"scenario {scenario_id} does not belong to task {task}")
    rng = stream(seed, "world", task, scenario_id)
    w = World(task=task, scenario=sc, seed=seed,
              contact=ContactParams(stiffness=sc.params.get("contact_k", DEFAULT_CONTACT_K)))
    w.proprio_offset = np.array([
        rng.normal(0.0, PROPRIO_OFFSET_STD), rng.normal(0.0, PROPRIO_OFFSET_STD), 0.0,
    ])
    if task == "flip":
        xh = sc.params["hinge_x"]
        gap_center = sc.params.get("gap_center", DEFAULT_GAP_CENTER)
        w.geom = {
            "hinge_x": xh,
            "edge_x": xh - SLAB_LEN,
            "gap_center": gap_center,
            "gap_top": gap_center + GAP_HALF,
            "slab_weight": sc.params.get("slab_mass", 0.6) * 9.81,
        }
        h_noise = abs(rng.normal(0.0, 0.0008))          # one-sided: "too high"
        w_noise = rng.normal(0.0, 0.001)
        w.perc = {
            "edge_x": w.geom["edge_x"] + rng.normal(0.0, 0.0003) + rng.normal(0.0, obs_noise),
            "gap_center": gap_center + sc.params["height_bias"] + h_noise
            + rng.normal(0.0, obs_noise),
            # wall_x reports the face the slab leans against (hinge minus thickness)
            "wall_x": (xh - SLAB_THICK) - sc.params["wall_bias"] - w_noise
            + rng.normal(0.0, obs_noise),
        }
    elif task == "slot":
        w.geom = {
            "board_x": sc.params["board_x"],
            "slot1_y": sc.params["slot1_y"],
            "slot2_y": sc.params["slot2_y"],
        }
        w.perc = {
            "board_x": w.geom["board_x"],
            "slot1_y": w.geom["slot1_y"] + sc.params["slot1_bias"]
            + rng.normal(0.0, 0.0004) + rng.normal(0.0, obs_noise),
            "slot2_y": w.geom["slot2_y"] + sc.params["slot2_bias"]
            + rng.normal(0.0, 0.0007) + rng.normal(0.0, obs_noise),
        }
    else:
        raise UnknownScenario(f"unknown task {task}")
    return w


def start_pose(task: str) -> tuple[float, float, float]:
    if task == "flip":
        return 0.10, 0.05, 0.0
    return 0.10, 0.24, 0.0


def _contact_force(pen: float, closing_speed: float, cp: ContactParams) -> float:
    """Penalty normal force, clamped non-negative."""
    if pen <= 0.0:
        return 0.0
    return max(0.0, cp.stiffness * pen + cp.damping * closing_speed)


def step(world: World, tool_pose: Pose, tool_velocity: np.ndarray, dt: float) -> Wrench:
    """Advance object states one substep; return the measured (sensor) wrench.

    tool_velocity is the 6-axis velocity from the admittance state.  The
    sensor convention is minus the sum of contact wrenches on the tool.
    """
    x, y, _ = planar_project(tool_pose)
    vx, vy = float(tool_velocity[0]), float(tool_velocity[1])
    fx = fy = tz = 0.0
    world.contacts = []
    cp = world.contact

    if world.task == "flip":
        fx, fy = _step_flip(world, x, y, vx, vy, dt, cp)
    else:
        fx, fy = _step_slot(world, x, y, vx, vy, dt, cp)

    # shelf / table floor
    fn_floor = _contact_force(-y, -vy, cp)
    if fn_floor > 0.0:
        fy += fn_floor
        ft = -math.copysign(min(cp.mu * fn_floor, abs(cp.mu * fn_floor)), vx) if vx else 0.0
        fx += ft
        world.contacts.append({"name": "floor", "normal": fn_floor, "friction": abs(ft), "mu": cp.mu})

    world.time += dt
    if not (math.isfinite(fx) and math.isfinite(fy) and math.isfinite(world.theta)):
        raise NonFiniteState("world state diverged")
    # sensor convention: minus the contact wrench acting on the tool
    return Wrench(np.array([-fx, -fy, 0.0]), np.array([0.0, 0.0, -tz]))


def _step_flip(world: World, x, y, vx, vy, dt, cp: ContactParams):
    fx = fy = 0.0
    g = world.geom
    edge, hinge, gap_top = g["edge_x"], g["hinge_x"], g["gap_top"]

    if not world.inserted and not world.leaning and not world.seated and world.theta < math.radians(5):
        # slab front face: blocks the tool above the gap
        if gap_top < y <= SLAB_THICK + 0.004 and x > edge:
            fn = _contact_force(x - edge, vx, cp)
            if fn > 0.0:
                fx -= fn
                ft = -cp.mu * fn * _sgn(vy)
                fy += ft
                world.contacts.append({"name": "slab_face", "normal": fn, "friction": abs(ft), "mu": cp.mu})
        # sliding under the edge
        if y <= gap_top and x >= edge + 0.005:
            world.inserted = True
            world.stage1_reached = True

    if world.inserted and not world.leaning and not world.seated:
        if x < edge - 0.002:
            # retracted: disengage, slab falls back
            world.inserted = False
            world.theta = max(0.0, world.theta - SLAB_FALL_RATE * dt)
        else:
            arm = max(hinge - x, 1e-3)
            th = min(math.atan2(max(y, 0.0), arm), ENGAGE_CAP)
            world.theta = max(world.theta, th)  # slab rides up on the tool
            load = SLAB_LOAD_SHARE * g["slab_weight"] * math.cos(world.theta)
            if world.theta < math.radians(5) and y > gap_top:
                # slab still flat: underside acts as a stiff ceiling
                fn = _contact_force(y - gap_top, vy, cp)
                fy -= fn
                world.contacts.append({"name": "slab_ceiling", "normal": fn, "friction": 0.0, "mu": cp.mu})
            else:
                fy -= load
                world.contacts.append({"name": "slab_load", "normal": load, "friction": 0.0, "mu": cp.mu})
            if world.theta >= ROTATED_ANGLE:
                world.rotated = True
                world.leaning = True
                world.inserted = False
                world.theta = LEAN_ANGLE

    if world.leaning and not world.seated:
        face = hinge - SLAB_THICK
        fn = _contact_force(x - face, vx, cp) if y <= LEAN_FACE_TOP else 0.0
        if fn > 0.0:
            fx -= fn
            ft = -cp.mu * fn * _sgn(vy)
            fy += ft
            world.contacts.append({"name": "lean_face", "normal": fn, "friction": abs(ft), "mu": cp.mu})
        if fn > FLIP_BREAK_FORCE:
            world.hold_timer = 0.0
            world.break_timer += dt
            if world.break_timer >= FLIP_BREAK_TIME:
                # pushed past the wall: slab topples and jams
                world.overpushed = True
                world.leaning = False
                world.theta = 0.0
        elif FLIP_HOLD_FORCE <= fn <= FLIP_BREAK_FORCE:
            world.break_timer = 0.0
            world.hold_timer += dt
            if world.hold_timer >= FLIP_HOLD_TIME:
                world.seated = True
                world.leaning = False
                world.theta = math.pi / 2
        else:
            world.hold_timer = 0.0
            world.break_timer = 0.0

    if world.seated:
        world.theta = math.pi / 2
    elif not world.inserted and not world.leaning:
        world.theta = max(0.0, world.theta - SLAB_FALL_RATE * dt)

    # hard wall behind everything
    fn_wall = _contact_force(x - hinge, vx, cp)
    if fn_wall > 0.0:
        fx -= fn_wall
        world.contacts.append({"name": "wall", "normal": fn_wall, "friction": 0.0, "mu": cp.mu})
    return fx, fy


def _step_slot(world: World, x, y, vx, vy, dt, cp: ContactParams):
    fx = fy = 0.0
    g = world.geom
    board = g["board_x"]

    # pulling clear of the board before the second slot drops the belt
    if world.engaged1 and not world.engaged2 and x < board - 0.012:
        world.belt_slipped = True
        world.tension = 0.0

    # belt tension from travel below the first slot
    if world.engaged1 and not world.released and not world.belt_slipped:
        stretch = max(0.0, (g["slot1_y"] - y) - BELT_SLACK)
        world.tension = BELT_K * stretch
        fx += BELT_PULL_SHARE * world.tension  # belt pulls the tool boardward
    if world.released:
        world.tension = 0.0

    near1 = abs(y - g["slot1_y"]) <= SLOT1_TOL
    near2 = abs(y - g["slot2_y"]) <= SLOT2_TOL
    aligned = (near1 and not world.engaged1) or (
        near2 and world.engaged1 and not world.engaged2 and not world.belt_slipped)

    if aligned:
        # recessed slot: contact starts at the seat depth
        pen = x - (board + SLOT_SEAT_DEPTH)
        fn = _contact_force(pen, vx, cp)
        if fn > 0.0:
            fx -= fn
            world.contacts.append({"name": "slot_seat", "normal": fn, "friction": 0.0, "mu": SLOT_FACE_MU})
        if x >= board + SLOT_ENGAGE_DEPTH:
            if near1 and not world.engaged1:
                world.engaged1 = True
            elif near2 and world.engaged1 and not world.engaged2:
                world.engaged2 = True
                world.engage_tension = world.tension
    else:
        pen = x - board
        fn = _contact_force(pen, vx, cp)
        if fn > 0.0:
            fx -= fn
            ft = -SLOT_FACE_MU * fn * _sgn(vy)
            fy += ft
            world.contacts.append({"name": "board_face", "normal": fn, "friction": abs(ft), "mu": SLOT_FACE_MU})
            # chamfered ridge near the active slot steers toward its center
            target = None
            if not world.engaged1 and SLOT1_TOL < abs(y - g["slot1_y"]) <= CHAMFER_ZONE:
                target = g["slot1_y"]
            elif world.engaged1 and not world.engaged2 and SLOT2_TOL < abs(y - g["slot2_y"]) <= CHAMFER_ZONE:
                target = g["slot2_y"]
            if target is not None:
                fy += SLOT_CHAMFER * fn * _sgn(target - y)

    # release: pulling clear of the board after engagement
    if world.engaged2 and not world.released and x < board - 0.01:
        world.released = True
        world.release_ok = TENSION_LO <= world.tension <= TENSION_HI
    return fx, fy


def _sgn(v: float) -> float:
    if v > 1e-9:
        return 1.0
    if v < -1e-9:
        return -1.0
    return 0.0


# --- stages and outcomes ----------------------------------------------------

def _stage_flags(world: World) -> tuple:
    if world.task == "flip":
        s1 = world.stage1_reached or world.inserted or world.rotated or world.leaning or world.seated
        return (s1, world.rotated, world.seated)
    ok2 = world.engaged2 and TENSION_LO - 3.0 <= world.engage_tension <= TENSION_HI
    return (world.engaged1, ok2, world.released and world.release_ok)


def stage_status(world: World) -> StageStatus:
    flags = _stage_flags(world)
    stage = 0
    for f in flags:
        if not f:
            break
        stage += 1
    outcome = None
    if stage == 3:
        outcome = "success"
    elif world.time >= TIMEOUT_S:
        outcome = "timeout"
    return StageStatus(stage=stage, flags=flags, outcome=outcome)


def outcome_label(world: World, timed_out: bool = False) -> str:
    """Terminal outcome for a finished episode."""
    flags = _stage_flags(world)
    if all(flags):
        return "success"
    if timed_out or world.time >= TIMEOUT_S:
        return "timeout"
    if world.task == "flip":
        if world.overpushed:
            return "overpush"
        if not flags[0]:
            return "missed_insertion"
        return "incomplete_flipping"
    if not world.engaged1:
        return "missed_first_slot"
    if not world.engaged2:
        return "missed_second_slot"
    return "tension_out_of_band"


def terminal_success(world: World) -> bool:
    if world.task == "flip":
        return world.seated
    return world.released and world.release_ok


# --- observation features ---------------------------------------------------

FLIP_FEATURES = 6
SLOT_FEATURES = 6


def obs_features(world: World, episode_len: float) -> np.ndarray:
    """Perceived task features (biased geometry, visible object state, time)."""
    t_norm = min(world.time / episode_len, 1.5)
    if world.task == "flip":
        return np.array([
            world.perc["edge_x"],
            world.perc["gap_center"],
            world.perc["wall_x"],
            world.theta,
            1.0 if world.seated else 0.0,
            t_norm,
        ])
    return np.array([
        world.perc["board_x"],
        world.perc["slot1_y"],
        world.perc["slot2_y"],
        1.0 if world.engaged1 else 0.0,
        1.0 if world.engaged2 else 0.0,
        t_norm,
    ])


# --- rendering ---------------------------------------------------------------

def render_primitives(world: World, tool_xy=None, wrench=None) -> list:
    """Drawing primitives for the UI and plot emitter."""
    prims = []
    if world.task == "flip":
        g = world.geom
        prims.append({"kind": "segment", "a": [0.0, 0.0], "b": [g["hinge_x"], 0.0], "name": "shelf"})
        prims.append({"kind": "segment", "a": [g["hinge_x"], 0.0], "b": [g["hinge_x"], 0.25], "name": "wall"})
        th = world.theta
        ex = g["hinge_x"] - SLAB_LEN * math.cos(th)
        ey = SLAB_LEN * math.sin(th)
        prims.append({"kind": "polygon", "points": [
            [g["hinge_x"], 0.0], [ex, ey],
            [ex + SLAB_THICK * math.sin(th), ey + SLAB_THICK * math.cos(th)],
            [g["hinge_x"] + SLAB_THICK * math.sin(th), SLAB_THICK * math.cos(th)],
        ], "name": "slab"})
    else:
        g = world.geom
        prims.append({"kind": "segment", "a": [g["board_x"], 0.0], "b": [g["board_x"], 0.30], "name": "board"})
        for name, ys in (("slot1", g["slot1_y"]), ("slot2", g["slot2_y"])):
            prims.append({"kind": "segment", "a": [g["board_x"], ys - 0.003], "b": [g["board_x"] + 0.006, ys], "name": name})
    if tool_xy is not None:
        prims.append({"kind": "polygon", "points": [
            [tool_xy[0] - 0.008, tool_xy[1] - 0.004], [tool_xy[0] + 0.008, tool_xy[1] - 0.004],
            [tool_xy[0] + 0.008, tool_xy[1] + 0.004], [tool_xy[0] - 0.008, tool_xy[1] + 0.004],
        ], "name": "tool"})
        if wrench is not None:
            f = wrench.force if isinstance(wrench, Wrench) else wrench
            prims.append({"kind": "arrow", "a": list(tool_xy), "v": [float(f[0]) * 0.002, float(f[1]) * 0.002], "name": "force"})
    st = stage_status(world)
    prims.append({"kind": "banner", "text": f"{world.task} stage {st.stage}/3", "stage": st.stage})
    return prims
