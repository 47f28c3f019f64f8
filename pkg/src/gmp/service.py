"""Interactive steering service: sessions stream commanded motion at 50 Hz.

Each session owns a deterministic generation core (decoder + command encoder
+ base-frame integrator) driven by a paced thread.  Frames fan out through a
bounded ring buffer: slow consumers skip old frames (reported per client)
while generation never stalls.  All generation state is per-session; model
parameters are shared read-only.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .command import CommandEncoder, VelocityCommand, make_command
from .cvae import Cvae
from .dataset import H_BASE, P_KEY, Q_JOINTS, RobotPose, V_BASE, V_KEY, W_BASE, standing_pose
from .model import RobotModel, default_model, keypoints_local
from .rotations import yaw_matrix

SCHEMA = "gmp-stream/1"

ENV_ADDR = "GMP_ADDR"
ENV_GMP_CKPT = "GMP_CKPT"
ENV_CMD_CKPT = "GMP_CMD_CKPT"
ENV_RATE = "GMP_RATE"


@dataclass
class ServiceConfig:
    gmp_checkpoint: str = ""
    cmd_checkpoint: str = ""
    rate: float = 50.0
    max_sessions: int = 64
    idle_timeout: float = 300.0
    buffer_frames: int = 512

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        cfg = cls(
            gmp_checkpoint=os.environ.get(ENV_GMP_CKPT, ""),
            cmd_checkpoint=os.environ.get(ENV_CMD_CKPT, ""),
            rate=float(os.environ.get(ENV_RATE, 50.0)),
        )
        for k, v in overrides.items():
            if v is not None:
                setattr(cfg, k, v)
        return cfg


class SessionCore:
    """Deterministic frame generator; no clocks, no randomness.

    One advance() call produces exactly one frame event from the current
    command and pose, so identical command-per-frame logs replay to
    bit-identical payloads.
    """

    def __init__(self, decoder: Cvae, encoder: CommandEncoder, model: RobotModel, rate: float):
        self.decoder = decoder
        self.encoder = encoder
        self.model = model
        self.dt = 1.0 / rate
        self.command = VelocityCommand()
        pose = standing_pose(model)
        self.cur_std = decoder.standardize(pose.flat())
        self.frame = 0
        self.base_pos = np.array([0.0, 0.0, pose.flat()[H_BASE]])
        self.heading = 0.0

    def advance(self) -> dict:
        cmd = self.command
        z = self.encoder.encode_std(cmd.as_array()[None], self.cur_std[None])[0]
        nxt_std = self.decoder.decode_std(z[None], self.cur_std[None])[0]
        flat = self.decoder.unstandardize(nxt_std)
        if not np.all(np.isfinite(flat)):
            raise FloatingPointError(f"non-finite pose at frame {self.frame}")
        flat[P_KEY] = keypoints_local(self.model, flat[Q_JOINTS]).ravel()
        self.cur_std = self.decoder.standardize(flat)

        R = yaw_matrix(self.heading)
        self.base_pos = self.base_pos + R @ flat[V_BASE] * self.dt
        self.base_pos[2] = flat[H_BASE]
        self.heading += flat[W_BASE][2] * self.dt
        world = self.base_pos[None, :] + flat[P_KEY].reshape(8, 3) @ yaw_matrix(self.heading).T

        event = {
            "v": 1,
            "frame": self.frame,
            "t": round(self.frame * self.dt, 9),
            "command": [cmd.vx, cmd.vy, cmd.yaw_rate],
            "pose": {
                "v_base": flat[V_BASE].tolist(),
                "w_base": flat[W_BASE].tolist(),
                "q": flat[Q_JOINTS].tolist(),
                "p_key": flat[P_KEY].reshape(8, 3).tolist(),
                "v_key": flat[V_KEY].reshape(8, 3).tolist(),
                "h_base": float(flat[H_BASE]),
            },
            "base_pos": self.base_pos.tolist(),
            "heading": self.heading,
            "keypoints_world": world.tolist(),
        }
        self.frame += 1
        return event


def replay_session(
    decoder: Cvae,
    encoder: CommandEncoder,
    command_log: list[dict],
    n_frames: int,
    rate: float = 50.0,
    model: RobotModel | None = None,
) -> list[dict]:
    """Re-run a session from its frame-quantized command log.

    command_log entries: {"frame": first frame affected, "command": [vx, vy, yaw]}.
    """
    core = SessionCore(decoder, encoder, model or default_model(), rate)
    by_frame = {int(e["frame"]): e["command"] for e in command_log}
    events = []
    for t in range(n_frames):
        if t in by_frame:
            core.command = VelocityCommand(*by_frame[t])
        events.append(core.advance())
    return events


class Session:
    """Paced generation thread plus a ring buffer of recent events."""

    def __init__(self, sid: str, core: SessionCore, buffer_frames: int, idle_timeout: float):
        self.id = sid
        self.core = core
        self.cond = threading.Condition()
        self.events: deque[dict] = deque(maxlen=buffer_frames)
        self.command_log: list[dict] = []
        self.created = time.time()
        self.last_active = self.created
        self.idle_timeout = idle_timeout
        self.stopped = False
        self.error: str | None = None
        self.thread = threading.Thread(target=self._run, name=f"gmp-session-{sid}", daemon=True)

    def start(self):
        self.thread.start()

    def _run(self):
        period = self.core.dt
        deadline = time.monotonic()
        while True:
            with self.cond:
                if self.stopped:
                    return
                if time.time() - self.last_active > self.idle_timeout:
                    self.stopped = True
                    self.cond.notify_all()
                    return
                try:
                    event = self.core.advance()
                except FloatingPointError as exc:
                    self.error = str(exc)
                    self.stopped = True
                    self.cond.notify_all()
                    return
                self.events.append(event)
                self.cond.notify_all()
            deadline += period
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                deadline = time.monotonic()  # fell behind; don't burst to catch up

    def touch(self):
        self.last_active = time.time()

    def stop(self):
        with self.cond:
            self.stopped = True
            self.cond.notify_all()

    def set_command(self, cmd: VelocityCommand) -> int:
        with self.cond:
            self.core.command = cmd
            effective = self.core.frame
            self.command_log.append(
                {"frame": effective, "command": [cmd.vx, cmd.vy, cmd.yaw_rate]}
            )
        self.touch()
        return effective

    def events_since(self, cursor: int, wait: bool = False, timeout: float = 2.0):
        """(events with frame > cursor, dropped count for this client)."""
        with self.cond:
            if wait:
                self.cond.wait_for(
                    lambda: self.stopped or (len(self.events) > 0 and self.events[-1]["frame"] > cursor),
                    timeout=timeout,
                )
            fresh = [e for e in self.events if e["frame"] > cursor]
            dropped = 0
            if fresh and cursor >= 0:
                dropped = max(0, fresh[0]["frame"] - cursor - 1)
            return fresh, dropped


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="gmp steering service")
    sessions: dict[str, Session] = {}
    lock = threading.Lock()
    model = default_model()

    def _sweep():
        with lock:
            dead = [sid for sid, s in sessions.items() if s.stopped]
            for sid in dead:
                sessions.pop(sid, None)

    def _get(sid: str) -> Session | None:
        with lock:
            s = sessions.get(sid)
        if s is not None and s.stopped:
            return None
        return s

    @app.get("/healthz")
    def healthz():
        with lock:
            n = len(sessions)
        return {"ok": True, "sessions": n, "schema": SCHEMA}

    @app.post("/sessions")
    async def create_session(request: Request):
        _sweep()
        try:
            body = await request.json()
        except Exception:
            body = {}
        gmp_path = body.get("gmp") or config.gmp_checkpoint
        cmd_path = body.get("cmd") or config.cmd_checkpoint
        try:
            decoder = Cvae.load(gmp_path)
            encoder = CommandEncoder.load(cmd_path)
        except Exception as exc:
            return _error(400, f"checkpoint load failed: {exc}")
        with lock:
            if len(sessions) >= config.max_sessions:
                return _error(429, f"session capacity {config.max_sessions} reached")
            sid = secrets.token_hex(8)
            session = Session(sid, SessionCore(decoder, encoder, model, config.rate),
                              config.buffer_frames, config.idle_timeout)
            sessions[sid] = session
        session.start()
        return {"schema": SCHEMA, "id": sid, "frame_rate": config.rate}

    @app.post("/sessions/{sid}/command")
    async def post_command(sid: str, request: Request):
        session = _get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        try:
            body = await request.json()
            cmd, clamped = make_command(
                float(body.get("vx", 0.0)), float(body.get("vy", 0.0)),
                float(body.get("yaw_rate", 0.0)),
            )
        except Exception as exc:
            return _error(422, f"bad command body: {exc}")
        effective = session.set_command(cmd)
        return {
            "applied": {"vx": cmd.vx, "vy": cmd.vy, "yaw_rate": cmd.yaw_rate},
            "clamped": clamped,
            "effective_frame": effective,
        }

    @app.get("/sessions/{sid}/stream")
    def stream(sid: str, since: int = -1):
        session = _get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")

        def gen():
            cursor = since
            while True:
                fresh, dropped = session.events_since(cursor, wait=True)
                if not fresh:
                    if session.stopped:
                        return
                    continue
                session.touch()
                for i, event in enumerate(fresh):
                    if i == 0 and dropped:
                        event = {**event, "dropped": dropped}
                    yield json.dumps(event) + "\n"
                cursor = fresh[-1]["frame"]

        return StreamingResponse(gen(), media_type="application/x-ndjson")

    @app.get("/sessions/{sid}/state")
    def state(sid: str, since: int | None = None):
        session = _get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        session.touch()
        fresh, dropped = session.events_since(-1 if since is None else since)
        latest = fresh[-1] if fresh else None
        return {
            "id": sid,
            "frame": (latest or {}).get("frame", -1),
            "command": [session.core.command.vx, session.core.command.vy,
                        session.core.command.yaw_rate],
            "latest": latest,
            "events": fresh if since is not None else ([] if latest is None else [latest]),
            "dropped": dropped,
            "error": session.error,
        }

    @app.get("/sessions/{sid}/log")
    def log(sid: str):
        session = _get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        with session.cond:
            n = session.core.frame
            cmds = list(session.command_log)
        return {"id": sid, "frames": n, "commands": cmds, "rate": config.rate}

    @app.delete("/sessions/{sid}")
    def delete(sid: str):
        with lock:
            session = sessions.pop(sid, None)
        if session is None:
            return _error(404, f"unknown session {sid}")
        session.stop()
        return {"deleted": sid}

    return app


def run_service(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8731):
    addr = os.environ.get(ENV_ADDR)
    if addr:
        host, _, p = addr.partition(":")
        port = int(p) if p else port
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
