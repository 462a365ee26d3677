"""Live session endpoint for human piloting.

One WebSocket connection drives one cockpit session. The session loop owns
the simulator, the learner and the controller; the network side only feeds
it messages and carries its frames, so everything stays single-threaded and
ordered. Frames are newline-terminated JSON objects sent every control tick
(100 ms nominal); the most recent stick input is zero-order held and takes
effect on the tick after it arrives.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from starlette.websockets import WebSocket, WebSocketDisconnect

from .allocation import mda_filter
from .harness import (ONLINE, USER_ONLY, StudyConfig, build_models,
                      make_controller, make_online_learner, seed_label,
                      stream_rng)
from .koopman import KoopmanLearner, SnapshotPair  # noqa: F401 (learner type)
from .lander import ControlInput, ZERO_CONTROL, classify, reset, step
from .trials import TrialRecord, serialize_record

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
IDLE, RUNNING, TERMINAL = "Idle", "Running", "Terminal"


class BridgeSession:
    """State machine for one cockpit session, driven by handle_message and
    tick; both return the frames to transmit, in order."""

    def __init__(self, config: StudyConfig, session_id: str = "live",
                 log_path: str | Path | None = None):
        self.config = config
        self.session_id = session_id
        self.log_path = Path(log_path) if log_path else None
        self.phase = IDLE
        self.condition = USER_ONLY
        self.trial_index = 0
        self.models = build_models(config, Path(config.output_dir) / "models")
        self._learner: KoopmanLearner | None = None
        self._controller = None
        self._model_id: str | None = None
        self._input = ZERO_CONTROL
        self._input_clamped = False
        self._negotiated = False
        self._reset_trial_state()

    def _reset_trial_state(self) -> None:
        self._state = None
        self._steps = 0
        self._pending = None
        self._rows = {"states": [], "u_h": [], "u_a": [], "u_out": [], "admitted": []}

    # ------------------------------------------------------------- messages

    def handle_message(self, raw: str) -> list[dict]:
        try:
            msg = json.loads(raw)
            if not isinstance(msg, dict) or "type" not in msg:
                raise ValueError("frame must be an object with a 'type'")
        except (json.JSONDecodeError, ValueError) as exc:
            return [self._error(f"malformed message: {exc}")]
        kind = msg["type"]
        if not self._negotiated:
            if kind != "hello":
                return [self._error("expected hello frame first")]
            if msg.get("version") != PROTOCOL_VERSION:
                return [self._error(f"unsupported protocol version {msg.get('version')}")]
            self._negotiated = True
            return [{"type": "welcome", "version": PROTOCOL_VERSION,
                     "session": self.session_id,
                     "conditions": list(self.config.conditions)}]
        if kind == "input":
            return self._handle_input(msg)
        if kind == "start_trial":
            return self._handle_start(msg)
        if kind == "abort":
            if self.phase != RUNNING:
                return [self._error("no trial running")]
            return self._finish_trial("Aborted")
        if kind == "switch_condition":
            if self.phase == RUNNING:
                return [self._error("cannot switch condition mid-trial")]
            condition = msg.get("condition")
            if condition not in self.config.conditions:
                return [self._error(f"unknown condition {condition!r}")]
            self.condition = condition
            return [{"type": "condition", "condition": condition}]
        return [self._error(f"unknown message type {kind!r}")]

    def _handle_input(self, msg: dict) -> list[dict]:
        try:
            u1 = float(msg.get("u1", 0.0))
            u2 = float(msg.get("u2", 0.0))
            if not (math.isfinite(u1) and math.isfinite(u2)):
                raise ValueError("non-finite input")
        except (TypeError, ValueError) as exc:
            return [self._error(f"bad input frame: {exc}")]
        self._input, self._input_clamped = ControlInput(u1, u2).clamped()
        return []

    def _handle_start(self, msg: dict) -> list[dict]:
        if self.phase == RUNNING:
            return [self._error("trial already running")]
        condition = msg.get("condition", self.condition)
        if condition not in self.config.conditions:
            return [self._error(f"unknown condition {condition!r}")]
        self.condition = condition
        config = self.config
        if condition == USER_ONLY:
            self._controller = None
            self._learner = None
            self._model_id = None
        elif condition == ONLINE:
            if self._learner is None:  # learner persists across online trials
                self._learner, self._model_id = make_online_learner(config)
            self._controller = make_controller(config, self._learner.model)
        else:
            if condition not in self.models:
                return [self._error(f"no model available for {condition}")]
            model, self._model_id = self.models[condition]
            self._controller = make_controller(config, model)
            self._learner = None
        self._reset_trial_state()
        self._state = reset(config.sim, stream_rng(config.seed, 7, self.trial_index))
        self.phase = RUNNING
        return [{"type": "trial_started", "condition": condition,
                 "trial": self.trial_index}]

    # ----------------------------------------------------------------- tick

    def tick(self) -> list[dict]:
        """Advance one control period; emits one frame while a trial is
        live. The input applied here is whatever arrived strictly before
        this tick."""
        if self.phase == TERMINAL:
            self.phase = IDLE
            return []
        if self.phase != RUNNING:
            return []
        sim = self.config.sim
        state = self._state
        u_h = self._input
        if self._controller is not None:
            if self._learner is not None:
                self._controller.refresh(self._learner.model)
            u_a = self._controller.command(state)
        else:
            u_a = ZERO_CONTROL
        u_out, rec = mda_filter(u_h, u_a, self.config.allocation_mode,
                                timestamp=self._steps * sim.dt_log)
        if self._controller is None:
            u_out = u_h
        if self._learner is not None and self._pending is not None and self._pending[2]:
            self._learner.update(SnapshotPair(self._pending[0], self._pending[1],
                                              state, u_out))
        self._pending = (state, u_out,
                         rec.admitted if self._controller is not None else False)
        next_state = step(state, u_out, sim)
        self._rows["states"].append(state)
        self._rows["u_h"].append(u_h.as_tuple())
        self._rows["u_a"].append(u_a.as_tuple())
        self._rows["u_out"].append(u_out.as_tuple())
        self._rows["admitted"].append(rec.admitted)
        self._steps += 1
        self._state = next_state
        status = classify(next_state, self._steps * sim.dt_log, sim)
        frame = {
            "type": "frame",
            "t": round(self._steps * sim.dt_log, 6),
            "condition": self.condition,
            "trial": self.trial_index,
            "state": list(next_state.as_tuple()),
            "u_h": list(u_h.as_tuple()),
            "u_h_clamped": self._input_clamped,
            "u_a": list(u_a.as_tuple()),
            "u_out": list(u_out.as_tuple()),
            "admitted": rec.admitted,
            "status": status.value,
        }
        if status.terminal:
            return [frame] + self._finish_trial(status.value)
        return [frame]

    def _finish_trial(self, outcome: str) -> list[dict]:
        sim = self.config.sim
        if self._learner is not None and self._pending is not None and self._pending[2]:
            self._learner.update(SnapshotPair(self._pending[0], self._pending[1],
                                              self._state, ZERO_CONTROL))
        record = TrialRecord(
            condition=self.condition,
            trial_index=self.trial_index,
            seed=seed_label(self.config.seed, 7, self.trial_index),
            model_id=self._model_id,
            dt=sim.dt_log,
            states=np.array([s.as_tuple() for s in self._rows["states"]]
                            + [self._state.as_tuple()]),
            u_h=np.array(self._rows["u_h"]).reshape(self._steps, 2),
            u_a=np.array(self._rows["u_a"]).reshape(self._steps, 2),
            u_out=np.array(self._rows["u_out"]).reshape(self._steps, 2),
            admitted=np.array(self._rows["admitted"], dtype=bool),
            outcome=outcome,
            duration=self._steps * sim.dt_log,
            pilot="human",
        )
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a") as fh:
                fh.write(serialize_record(record))
        self.last_record = record
        self.trial_index += 1
        self.phase = TERMINAL
        self._reset_trial_state()
        return [{"type": "trial_end", "outcome": outcome,
                 "duration": record.duration, "trial": record.trial_index}]

    def _error(self, message: str) -> dict:
        log.warning("session %s: %s", self.session_id, message)
        return {"type": "error", "message": message}


def _encode(frame: dict) -> str:
    return json.dumps(frame) + "\n"


def build_app(config: StudyConfig, tick_seconds: float = 0.1,
              log_dir: str | Path | None = None) -> FastAPI:
    """ASGI app exposing one cockpit session per /session connection."""
    app = FastAPI(title="koopland bridge")
    sessions = {"count": 0}

    @app.websocket("/{session_name}")
    async def session_endpoint(ws: WebSocket, session_name: str):  # pragma: no cover - thin shell
        await ws.accept()
        sessions["count"] += 1
        sid = f"{session_name}-{sessions['count']}"
        path = (Path(log_dir) / f"{sid}.jsonl") if log_dir else None
        session = BridgeSession(config, session_id=sid, log_path=path)
        queue: asyncio.Queue = asyncio.Queue()

        async def reader():
            try:
                while True:
                    await queue.put(await ws.receive_text())
            except WebSocketDisconnect:
                await queue.put(None)

        reader_task = asyncio.create_task(reader())
        get_task = asyncio.create_task(queue.get())
        next_tick = time.monotonic() + tick_seconds
        try:
            while True:
                timeout = max(next_tick - time.monotonic(), 0.0)
                done, _ = await asyncio.wait({get_task}, timeout=timeout)
                if get_task in done:
                    raw = get_task.result()
                    if raw is None:  # client vanished mid-session
                        if session.phase == RUNNING:
                            session.handle_message('{"type": "abort"}')
                        break
                    for frame in session.handle_message(raw):
                        await ws.send_text(_encode(frame))
                    get_task = asyncio.create_task(queue.get())
                else:
                    for frame in session.tick():
                        await ws.send_text(_encode(frame))
                    next_tick += tick_seconds
        except WebSocketDisconnect:
            if session.phase == RUNNING:
                session.handle_message('{"type": "abort"}')
        finally:
            for task in (reader_task, get_task):
                task.cancel()
    return app


def serve(config: StudyConfig, port: int = 8765, host: str = "127.0.0.1",
          tick_seconds: float = 0.1) -> None:
    """Run the bridge until interrupted. Models are fitted (or loaded) up
    front from the study config; live trial logs land in the output dir."""
    import uvicorn
    log_dir = Path(config.output_dir) / "logs"
    app = build_app(config, tick_seconds=tick_seconds, log_dir=log_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


__all__ = ["BridgeSession", "PROTOCOL_VERSION", "build_app", "serve"]
