"""Live simulation service: one sim loop per session, state streaming over a
full-duplex WebSocket, and atomic online command edits (circle speed, flip
triggers, target moves, task switches, pause/resume).

Frames are self-describing JSON with a schema version; the sim never blocks
on slow consumers (bounded per-subscriber queues, drop-oldest).
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .controllers import make_controller
from .env import REWARD_TERMS
from .evals import hover_env
from .logs import TRAJ_COLUMNS
from .params import MavParams
from .tasks import FLAG_NAMES

SCHEMA_VERSION = 1
STREAM_RATE = 50.0          # Hz
POLICY_RATE = 100.0
MAX_LOG_ROWS = 60_000       # ~10 min


@dataclass
class Subscriber:
    queue: asyncio.Queue
    loop: asyncio.AbstractEventLoop

    def push(self, frame: str) -> None:
        def _put() -> None:
            while self.queue.qsize() >= 8:   # drop-oldest, never block the sim
                try:
                    self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    break
            self.queue.put_nowait(frame)

        self.loop.call_soon_threadsafe(_put)


class Session:
    def __init__(
        self,
        sid: str,
        controller_kind: str,
        task: str,
        params: MavParams,
        checkpoint: str | None = None,
        speed_mult: float = 1.0,
        seed: int = 0,
    ):
        self.sid = sid
        self.controller_kind = controller_kind
        self.task = task
        self.params = params
        self.controller = make_controller(controller_kind, params, checkpoint=checkpoint)
        self.env = hover_env(task, params=params, seed=seed)
        self.speed_mult = speed_mult
        self.paused = False
        self.alive = True
        self.steps = 0
        self._cmd_lock = threading.Lock()
        self._commands: list[dict] = []
        self._subs: list[Subscriber] = []
        self._log_rows: list[str] = []
        self._last_frame: str = ""
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    # --- command path --------------------------------------------------------

    def submit(self, cmd: dict) -> dict:
        """Queue an edit; it applies atomically before the next policy step."""
        ack: dict = {"ok": True, "applied": dict(cmd)}
        kind = cmd.get("type")
        if kind == "circle_speed":
            value = float(cmd.get("value", 0.0))
            limit = self.env.episode.circle_speed_max
            if abs(value) > limit:
                ack["warning"] = f"speed clamped to +-{limit}"
                value = float(np.clip(value, -limit, limit))
            ack["applied"]["value"] = value
        elif kind == "flip":
            cmd["turns"] = int(cmd.get("turns", 1))
            ack["applied"]["turns"] = cmd["turns"]
        elif kind == "pos_target":
            cmd["p"] = [float(x) for x in cmd.get("p", self.env.target_p[0])]
        elif kind == "task":
            if cmd.get("value") not in ("pos", "circle", "flip"):
                return {"ok": False, "error": f"unknown task {cmd.get('value')!r}"}
        elif kind in ("pause", "resume"):
            pass
        else:
            return {"ok": False, "error": f"unknown command type {kind!r}"}
        with self._cmd_lock:
            self._commands.append({**cmd, **{"value": ack["applied"].get("value", cmd.get("value"))}})
        return ack

    def _apply_commands(self) -> None:
        with self._cmd_lock:
            cmds, self._commands = self._commands, []
        for cmd in cmds:
            kind = cmd["type"]
            if kind == "circle_speed":
                self.env.set_circle_speed(0, float(cmd["value"]))
            elif kind == "flip":
                self.env.trigger_flip(0, int(cmd.get("turns", 1)))
            elif kind == "pos_target":
                self.env.set_target(0, np.asarray(cmd["p"], dtype=float), cmd.get("yaw"))
            elif kind == "task":
                self.env.set_task(0, cmd["value"])
                self.task = cmd["value"]
                self.controller.reset()
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False

    # --- sim loop --------------------------------------------------------------

    def _run(self) -> None:
        period = 1.0 / POLICY_RATE
        stream_every = int(round(POLICY_RATE / STREAM_RATE))
        next_wall = time.monotonic()
        ticks = 0
        while self.alive:
            next_wall += period / self.speed_mult
            ticks += 1
            self._apply_commands()
            if not self.paused:
                action = np.asarray(self.controller.act(self.env)).reshape(1, 4)
                obs, reward, done, info = self.env.step(action)
                self._record(action[0], float(reward[0]), info["reward_terms"][0])
                self.steps += 1
            if ticks % stream_every == 0:
                frame = self._frame()
                self._last_frame = frame
                for sub in list(self._subs):
                    sub.push(frame)
            delay = next_wall - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_wall = time.monotonic()   # fell behind; do not burst

    def _record(self, action: np.ndarray, reward: float, terms: np.ndarray) -> None:
        env, i = self.env, 0
        s = env.state
        row = np.concatenate(
            [
                [s.t[i]], s.p[i], s.v[i], s.r[i].reshape(9), s.w[i], s.motor[i],
                [s.voltage[i]], action, terms,
                [reward, env.flag[i], env.task_spec(i).command],
            ]
        )
        if len(self._log_rows) < MAX_LOG_ROWS:
            self._log_rows.append(",".join(f"{x:.9g}" for x in row))

    def _frame(self) -> str:
        env, i = self.env, 0
        s = env.state
        spec = env.task_spec(i)
        return json.dumps(
            {
                "v": SCHEMA_VERSION,
                "type": "state",
                "session": self.sid,
                "t": round(float(s.t[i]), 4),
                "p": [float(x) for x in s.p[i]],
                "vel": [float(x) for x in s.v[i]],
                "r": [float(x) for x in s.r[i].reshape(9)],
                "w": [float(x) for x in s.w[i]],
                "throttle": float(env.prev_action[i, 0]),
                "action": [float(x) for x in env.prev_action[i]],
                "task": FLAG_NAMES[float(env.flag[i])],
                "command": float(spec.command),
                "tiltage": float(s.r[i, 2, 2]),
                "voltage": float(s.voltage[i]),
                "paused": self.paused,
            }
        )

    def subscribe(self, loop: asyncio.AbstractEventLoop) -> Subscriber:
        sub = Subscriber(queue=asyncio.Queue(), loop=loop)
        self._subs.append(sub)
        if self._last_frame:
            sub.push(self._last_frame)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        if sub in self._subs:
            self._subs.remove(sub)

    def log_csv(self) -> str:
        return "\n".join([",".join(TRAJ_COLUMNS), *self._log_rows]) + "\n"

    def stop(self) -> None:
        self.alive = False
        self._thread.join(timeout=2.0)

    def describe(self) -> dict:
        return {
            "id": self.sid,
            "controller": self.controller_kind,
            "task": self.task,
            "t": float(self.env.state.t[0]),
            "paused": self.paused,
            "stream_rate": STREAM_RATE,
        }


def create_app(params: MavParams | None = None, console_dir: str | None = None) -> FastAPI:
    params = params or MavParams()
    app = FastAPI(title="taco live service", version=str(SCHEMA_VERSION))
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)

    def _get(sid: str) -> Session:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail=f"no session {sid}")
        return sessions[sid]

    @app.post("/sessions")
    def create_session(body: dict):
        kind = body.get("controller", "se3")
        task = body.get("task", "pos")
        if task not in ("pos", "circle", "flip"):
            raise HTTPException(status_code=422, detail=f"unknown task {task!r}")
        try:
            session = Session(
                sid=f"s{next(counter)}",
                controller_kind=kind,
                task=task,
                params=params,
                checkpoint=body.get("checkpoint"),
                speed_mult=float(body.get("speed_mult", 1.0)),
                seed=int(body.get("seed", 0)),
            )
        except (ValueError, RuntimeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if body.get("speed") is not None:
            session.submit({"type": "circle_speed", "value": float(body["speed"])})
        sessions[session.sid] = session
        return {"id": session.sid, "schema": SCHEMA_VERSION, "stream_rate": STREAM_RATE}

    @app.get("/sessions")
    def list_sessions():
        return [s.describe() for s in sessions.values()]

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        _get(sid).stop()
        del sessions[sid]
        return {"ok": True}

    @app.post("/sessions/{sid}/command")
    def command(sid: str, body: dict):
        ack = _get(sid).submit(body)
        if not ack.get("ok"):
            raise HTTPException(status_code=422, detail=ack.get("error"))
        return ack

    @app.get("/sessions/{sid}/log")
    def download_log(sid: str):
        return PlainTextResponse(_get(sid).log_csv(), media_type="text/csv")

    @app.websocket("/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str):
        if sid not in sessions:
            await ws.close(code=4404)
            return
        session = sessions[sid]
        await ws.accept()
        sub = session.subscribe(asyncio.get_running_loop())

        async def inbound():
            while True:
                text = await ws.receive_text()
                try:
                    cmd = json.loads(text)
                except json.JSONDecodeError:
                    ack = {"ok": False, "error": "bad json"}
                else:
                    ack = session.submit(cmd)
                await ws.send_text(json.dumps({"v": SCHEMA_VERSION, "type": "ack", **ack}))

        reader = asyncio.create_task(inbound())
        try:
            while True:
                frame = await sub.queue.get()
                await ws.send_text(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader.cancel()
            session.unsubscribe(sub)

    @app.get("/healthz")
    def health():
        return {"ok": True, "sessions": len(sessions), "schema": SCHEMA_VERSION}

    if console_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    app.state.sessions = sessions
    return app
