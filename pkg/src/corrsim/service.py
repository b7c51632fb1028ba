"""Live correction service: one websocket client drives episodes.

A single client connects and exchanges JSON text messages with the tick
loop.  Outbound, one frame per 50 Hz tick:

    {"type": "frame", "tick": int, "time": s, "episode_id": str,
     "mode": str, "stage": int, "correction": bool, "recording": bool,
     "tool": [x, y, yaw], "measured": [6], "human": [6],
     "primitives": [...], "outcome": str | null}

Inbound commands:

    {"type": "force", "fx": px, "fy": px}   corrective force; the pixel
        vector is scaled by the server's force scale and held (zero-order)
        until 0.2 s after the last message, then decays to zero
    {"type": "flag_down"} / {"type": "flag_up"}   correction flag; in
        TakeOver mode the flag also zeroes stiffness and suppresses and
        clears the command buffer while held
    {"type": "start", "scenario_id": optional, "seed": optional}
    {"type": "end", "save": bool}           finish and optionally record
    {"type": "set_mode", "mode": "OnPolicyDelta" | "TakeOver"}
    {"type": "step", "n": int}              advance ticks (lockstep only)

A command received before a tick is computed affects that tick or the
next one at the latest.  Saved episodes land in the record directory in
the standard episode format.  A second concurrent client is refused with
an error frame and closed.
"""

import asyncio
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket
from starlette.websockets import WebSocketDisconnect

from . import world as wd
from .base_policy import ScriptedPolicy
from .errors import CorrsimError, SecondClientRejected, UnknownScenario
from .harness import EpisodeSession
from .intervener import Action
from .recorder import TICK_DT, save_episode
from .scenarios import scenario_ids

FORCE_HOLD_S = 0.2     # force command held this long past the last message
DEFAULT_FORCE_SCALE = 0.05  # N per pixel of drag

MODES = ("OnPolicyDelta", "TakeOver")


class LiveSession:
    """Tick-level state machine behind one client connection."""

    def __init__(self, task: str, scenario_set: str = "collect",
                 force_scale: float = DEFAULT_FORCE_SCALE,
                 record_dir: str | Path = "recordings",
                 policy=None, residual=None, seed: int = 0):
        self.task = task
        self.scenario_set = scenario_set
        self.force_scale = force_scale
        self.record_dir = Path(record_dir)
        self.policy = policy if policy is not None else ScriptedPolicy(task)
        self.residual = residual
        self.seed = seed
        self.mode = "OnPolicyDelta"
        self.session: EpisodeSession | None = None
        self.episode_id = ""
        self.episode_count = 0
        self.outcome: str | None = None
        self.flag = False
        self._flag_edge = False       # transition tick pending
        self._flag_release = False
        self.force = np.zeros(2)
        self.force_tick = -(10 ** 9)
        self.scenarios = scenario_ids(task, scenario_set)
        self._scenario_cursor = 0

    # --- commands -------------------------------------------------------------

    def handle(self, cmd: dict) -> dict | None:
        """Apply one inbound command; returns an immediate reply or None."""
        kind = cmd.get("type")
        if kind == "force":
            self.force = self.force_scale * np.array(
                [float(cmd.get("fx", 0.0)), float(cmd.get("fy", 0.0))])
            if self.session is not None:
                self.force_tick = self.session.tick_index
            return None
        if kind == "flag_down":
            if not self.flag:
                self.flag = True
                self._flag_edge = True
            return None
        if kind == "flag_up":
            if self.flag:
                self.flag = False
                self._flag_release = True
            return None
        if kind == "set_mode":
            mode = cmd.get("mode")
            if mode not in MODES:
                return {"type": "error", "error": f"unknown mode {mode!r}"}
            if self.session is not None:
                return {"type": "error", "error": "cannot change mode mid-episode"}
            self.mode = mode
            return {"type": "ack", "mode": mode}
        if kind == "start":
            return self._start(cmd.get("scenario_id"), cmd.get("seed"))
        if kind == "end":
            return self._end(bool(cmd.get("save", False)))
        if kind == "step":
            return None  # driven by the transport loop
        return {"type": "error", "error": f"unknown command {kind!r}"}

    def _start(self, scenario_id: str | None, seed: int | None) -> dict:
        if self.session is not None:
            return {"type": "error", "error": "episode already running"}
        if scenario_id is None:
            scenario_id = self.scenarios[self._scenario_cursor % len(self.scenarios)]
            self._scenario_cursor += 1
        elif scenario_id not in self.scenarios:
            raise UnknownScenario(f"{scenario_id} not in set {self.scenario_set!r}")
        if seed is None:
            seed = self.seed + self.episode_count
        self.episode_count += 1
        self.episode_id = f"{self.task}-live-{self.episode_count:04d}"
        self.session = EpisodeSession(self.task, scenario_id, int(seed),
                                      self.policy, self.mode,
                                      residual=self.residual)
        self.outcome = None
        self.flag = False
        self._flag_edge = self._flag_release = False
        self.force = np.zeros(2)
        self.force_tick = -(10 ** 9)
        return {"type": "started", "episode_id": self.episode_id,
                "scenario_id": scenario_id, "seed": int(seed)}

    def _end(self, save: bool) -> dict:
        if self.session is None:
            return {"type": "error", "error": "no episode running"}
        ep = self.session.episode()
        path = None
        if save:
            self.record_dir.mkdir(parents=True, exist_ok=True)
            path = self.record_dir / f"{self.episode_id}.ep"
            save_episode(path, ep)
        reply = {"type": "ended", "episode_id": self.episode_id,
                 "outcome": ep.outcome, "stage": ep.stage_reached,
                 "saved": str(path) if path else None}
        self.session = None
        return reply

    # --- tick -----------------------------------------------------------------

    def _action(self) -> Action:
        held = self.force.copy()
        age = (self.session.tick_index - self.force_tick) * TICK_DT
        if age > FORCE_HOLD_S:
            held[:] = 0.0
        human = np.zeros(6)
        human[:2] = held
        correction = self.flag or bool(np.any(held))
        stiffness = None
        clear = False
        if self.mode == "TakeOver":
            if self.flag:
                # held flag keeps the buffer suppressed and cleared
                clear = True
                stiffness = "zero" if self._flag_edge else "zero"
            elif self._flag_release:
                stiffness = "restore"
        self._flag_edge = False
        self._flag_release = False
        return Action(human, correction=correction, clear_buffer=clear,
                      stiffness=stiffness)

    def advance(self) -> dict:
        """Compute one tick and return its outbound frame."""
        if self.session is None:
            return {"type": "idle", "mode": self.mode, "task": self.task}
        rec = self.session.tick(action=self._action())
        s = self.session
        if self.outcome is None and wd.terminal_success(s.w):
            self.outcome = "success"
        prims = wd.render_primitives(s.w, tool_xy=(rec.executed[0], rec.executed[1]),
                                     wrench=rec.measured[:3])
        return {
            "type": "frame",
            "tick": s.tick_index - 1,
            "time": rec.t,
            "episode_id": self.episode_id,
            "mode": self.mode,
            "stage": rec.stage,
            "correction": bool(rec.correction),
            "recording": True,
            "tool": [float(v) for v in rec.executed],
            "measured": [float(v) for v in rec.measured],
            "human": [float(v) for v in rec.human_force],
            "primitives": prims,
            "outcome": self.outcome,
        }


# --- transport ---------------------------------------------------------------

def build_app(task: str, scenario_set: str = "collect",
              force_scale: float = DEFAULT_FORCE_SCALE,
              record_dir: str | Path = "recordings",
              policy=None, residual=None, seed: int = 0,
              realtime: bool = False):
    """FastAPI app with a single-client websocket at /ws.

    With realtime=False the client paces the loop by sending step
    commands; with realtime=True the server ticks on a 50 Hz timer.
    """
    app = FastAPI()
    app.state.session = LiveSession(task, scenario_set, force_scale,
                                    record_dir, policy, residual, seed)
    app.state.client = None

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if app.state.client is not None:
            await ws.send_text(json.dumps(
                {"type": "error", "error": SecondClientRejected.__doc__}))
            await ws.close(code=1008)
            return
        app.state.client = ws
        live: LiveSession = app.state.session
        try:
            if realtime:
                await _run_realtime(ws, live)
            else:
                await _run_lockstep(ws, live)
        finally:
            app.state.client = None

    return app


async def _run_lockstep(ws, live: LiveSession) -> None:
    while True:
        try:
            raw = await ws.receive_text()
        except WebSocketDisconnect:
            return
        try:
            cmd = json.loads(raw)
        except json.JSONDecodeError as e:
            await ws.send_text(json.dumps({"type": "error", "error": str(e)}))
            continue
        try:
            reply = live.handle(cmd)
        except CorrsimError as e:
            await ws.send_text(json.dumps({"type": "error", "error": str(e)}))
            continue
        if reply is not None:
            await ws.send_text(json.dumps(reply))
        if cmd.get("type") == "step":
            for _ in range(max(1, int(cmd.get("n", 1)))):
                await ws.send_text(json.dumps(live.advance()))


async def _run_realtime(ws, live: LiveSession) -> None:
    async def receiver():
        while True:
            raw = await ws.receive_text()
            try:
                cmd = json.loads(raw)
                reply = live.handle(cmd)
            except (json.JSONDecodeError, CorrsimError) as e:
                reply = {"type": "error", "error": str(e)}
            if reply is not None:
                await ws.send_text(json.dumps(reply))

    async def ticker():
        while True:
            frame = live.advance()
            if frame["type"] == "frame":
                await ws.send_text(json.dumps(frame))
            await asyncio.sleep(TICK_DT)

    recv = asyncio.ensure_future(receiver())
    tick = asyncio.ensure_future(ticker())
    try:
        done, pending = await asyncio.wait({recv, tick},
                                           return_when=asyncio.FIRST_EXCEPTION)
        for t in pending:
            t.cancel()
        for t in done:
            exc = t.exception()
            if exc is not None and not isinstance(exc, WebSocketDisconnect):
                raise exc
    finally:
        for t in (recv, tick):
            t.cancel()


def serve(port: int = 8701, task: str = "flip", scenario_set: str = "collect",
          force_scale: float = DEFAULT_FORCE_SCALE,
          record_dir: str | Path = "recordings",
          policy=None, residual=None, seed: int = 0,
          realtime: bool = True) -> None:
    """Run the websocket service until interrupted."""
    import uvicorn

    app = build_app(task, scenario_set, force_scale, record_dir,
                    policy, residual, seed, realtime=realtime)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
