"""Live monitoring sessions over a small HTTP + WebSocket API.

A session hides a freshly sampled aircraft behind the simulator, advances
one sample period per step message, and streams telemetry with the
calibrated p-value so the operator can decide to abort.  The engine below
is plain Python; the FastAPI app wraps it in the wire protocol.

Wire protocol (schema_version 1)
--------------------------------
REST:
  GET  /api/metadata                     -> artifact + plant summary
  POST /api/sessions                     -> {"epsilon", "seed"?, "mode"?} -> session info
  POST /api/sessions/{id}/abort          -> abort acknowledgement
  GET  /api/sessions/{id}/debrief        -> hidden params, log, counterfactual
WebSocket /api/sessions/{id}/stream, one JSON text message per event:
  client -> {"type": "step"}                          (scripted mode)
            {"type": "step", "aileron": a, "rudder": r}  (free-stick mode)
            {"type": "abort"}
  server -> {"type": "telemetry", "t", "time", "outputs", "p_value",
             "alert", "status"}          p_value/alert are null while the
                                         output buffer is still filling
            {"type": "abort_ack", "t", "status"}
            {"type": "error", "message"}
"""

from __future__ import annotations

import asyncio
import secrets
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .config import ExperimentConfig
from .conformal import CalibratedMonitor, load_monitor, monitor_step
from .errors import IncompatibleArtifactError, SessionStateError
from .plant import (
    NY,
    AircraftParams,
    ControllerGains,
    DoubletScript,
    PilotCommand,
    plant_from_config,
    sample_params,
    step,
)

SCHEMA_VERSION = 1

STATUS_RUNNING = "running"
STATUS_ABORTED = "aborted"
STATUS_COMPLETED = "completed"
STATUS_VIOLATED = "violated"

MODE_SCRIPTED = "scripted"
MODE_FREE = "free"


@dataclass
class SessionState:
    session_id: str
    params: AircraftParams          # hidden until debrief
    gains: ControllerGains
    script: DoubletScript
    dt: float
    horizon_steps: int
    ny_limit: float
    saturation: float
    substeps: int
    epsilon: float
    mode: str
    seed: int
    x: np.ndarray
    buffer: list = field(default_factory=list)   # last past_steps + 1 outputs
    t: int = 0
    status: str = STATUS_RUNNING
    log: list = field(default_factory=list)


class SessionEngine:
    """Owns the monitor artifact and the registry of live sessions."""

    def __init__(self, monitor: CalibratedMonitor, config: ExperimentConfig):
        config.validate()
        self._check_compatibility(monitor, config)
        self.monitor = monitor
        self.config = config
        self.sessions: dict[str, SessionState] = {}

    @staticmethod
    def _check_compatibility(monitor: CalibratedMonitor, config: ExperimentConfig) -> None:
        mismatches = []
        pairs = [
            ("dt", monitor.metadata.get("dt"), config.plant.dt),
            ("past_steps", monitor.metadata.get("past_steps"), config.monitoring.past_steps),
            ("lead_steps", monitor.metadata.get("lead_steps"), config.monitoring.lead_steps),
        ]
        for name, artifact_side, config_side in pairs:
            if artifact_side != config_side:
                mismatches.append(f"{name}: artifact={artifact_side} config={config_side}")
        if mismatches:
            raise IncompatibleArtifactError(
                "monitor artifact and plant config disagree on " + "; ".join(mismatches)
            )

    def metadata(self) -> dict:
        plant = self.config.plant
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.monitor.method,
            "n_calibration": self.monitor.n_calibration,
            "dt": plant.dt,
            "past_steps": self.config.monitoring.past_steps,
            "lead_steps": self.config.monitoring.lead_steps,
            "ny_limit": plant.ny_limit,
            "horizon": plant.horizon,
            "doublet_start": plant.doublet_start,
            "command_saturation": plant.command_saturation,
        }

    def create_session(self, epsilon: float, seed: int | None = None,
                       mode: str = MODE_SCRIPTED) -> SessionState:
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie strictly in (0, 1)")
        if mode not in (MODE_SCRIPTED, MODE_FREE):
            raise ValueError(f"unknown mode {mode!r}")
        if seed is None:
            seed = secrets.randbits(63)
        plant = self.config.plant
        nominal, gains, script = plant_from_config(plant)
        params = sample_params(nominal, plant.perturbation, seed)
        session = SessionState(
            session_id=secrets.token_hex(8),
            params=params, gains=gains, script=script,
            dt=plant.dt, horizon_steps=int(round(plant.horizon / plant.dt)),
            ny_limit=plant.ny_limit, saturation=plant.command_saturation,
            substeps=plant.rk4_substeps,
            epsilon=float(epsilon), mode=mode, seed=int(seed),
            x=np.zeros(3),
        )
        # The buffer fills from step outputs only, so with past_steps = 2 the
        # first two telemetry records carry no p-value.
        self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> SessionState:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise KeyError(f"no session {session_id!r}") from None

    def session_step(self, session_id: str, command: PilotCommand | None = None) -> dict:
        """Advance one sample period; returns the telemetry record."""
        session = self.get(session_id)
        if session.status != STATUS_RUNNING:
            raise SessionStateError(f"session is {session.status}, not running")
        if session.mode == MODE_SCRIPTED:
            cmd = session.script.command(session.t * session.dt)
        else:
            cmd = command if command is not None else PilotCommand(0.0, 0.0)
            cmd.validate(session.saturation)
        session.x, y = step(session.params, session.gains, session.x, cmd,
                            session.dt, substeps=session.substeps)
        session.t += 1
        needed = self.monitor.past_steps + 1
        session.buffer.append(y)
        if len(session.buffer) > needed:
            session.buffer.pop(0)
        p_val = None
        alert = None
        if len(session.buffer) == needed:
            verdict = monitor_step(self.monitor, np.stack(session.buffer), session.epsilon)
            p_val = verdict.p_value
            alert = verdict.alert
        if abs(y[NY]) >= session.ny_limit:
            session.status = STATUS_VIOLATED
        elif session.t >= session.horizon_steps:
            session.status = STATUS_COMPLETED
        record = {
            "t": session.t,
            "time": session.t * session.dt,
            "outputs": [float(v) for v in y],
            "p_value": p_val,
            "alert": alert,
            "status": session.status,
        }
        session.log.append(record)
        return record

    def abort_session(self, session_id: str) -> dict:
        session = self.get(session_id)
        if session.status != STATUS_RUNNING:
            raise SessionStateError(f"cannot abort a session that is {session.status}")
        session.status = STATUS_ABORTED
        return {"session_id": session_id, "status": session.status, "t": session.t}

    def debrief(self, session_id: str) -> dict:
        """Reveal the hidden aircraft, the log, and the counterfactual remainder."""
        session = self.get(session_id)
        if session.status == STATUS_RUNNING:
            raise SessionStateError("debrief requires a terminal session")
        counterfactual = None
        if session.status == STATUS_ABORTED:
            counterfactual = self._counterfactual(session)
        return {
            "session_id": session_id,
            "status": session.status,
            "epsilon": session.epsilon,
            "seed": session.seed,
            "hidden_params": {
                "A": session.params.A.tolist(),
                "B": session.params.B.tolist(),
                "C": session.params.C.tolist(),
                "D": session.params.D.tolist(),
                "V": session.params.V,
                "g": session.params.g,
            },
            "telemetry": list(session.log),
            "counterfactual": counterfactual,
        }

    def _counterfactual(self, session: SessionState) -> dict:
        """Scripted continuation from the abort state out to the horizon."""
        x = session.x.copy()
        t = session.t
        outputs = []
        violation_step = None
        while t < session.horizon_steps:
            cmd = session.script.command(t * session.dt)
            x, y = step(session.params, session.gains, x, cmd,
                        session.dt, substeps=session.substeps)
            t += 1
            outputs.append([float(v) for v in y])
            if violation_step is None and abs(y[NY]) >= session.ny_limit:
                violation_step = t
        return {
            "from_step": session.t,
            "outputs": outputs,
            "would_violate": violation_step is not None,
            "violation_step": violation_step,
        }


class CreateSessionRequest(BaseModel):
    epsilon: float
    seed: int | None = None
    mode: str = MODE_SCRIPTED
    pace: str = "lockstep"


def create_app(engine: SessionEngine) -> FastAPI:
    """FastAPI app speaking the wire protocol around a session engine."""
    app = FastAPI(title="aeromon monitor service")
    app.state.engine = engine

    def _get_or_404(session_id: str) -> SessionState:
        try:
            return engine.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")

    @app.get("/api/metadata")
    def metadata():
        return engine.metadata()

    @app.post("/api/sessions")
    def create_session(req: CreateSessionRequest):
        if req.pace not in ("lockstep", "realtime"):
            raise HTTPException(status_code=422, detail=f"unknown pace {req.pace!r}")
        try:
            session = engine.create_session(req.epsilon, seed=req.seed, mode=req.mode)
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err))
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.session_id,
            "epsilon": session.epsilon,
            "mode": session.mode,
            "pace": req.pace,
            "dt": session.dt,
            "past_steps": engine.monitor.past_steps,
            "horizon_steps": session.horizon_steps,
            "ny_limit": session.ny_limit,
        }

    @app.post("/api/sessions/{session_id}/abort")
    def abort(session_id: str):
        _get_or_404(session_id)
        try:
            return engine.abort_session(session_id)
        except SessionStateError as err:
            raise HTTPException(status_code=409, detail=str(err))

    @app.get("/api/sessions/{session_id}/debrief")
    def debrief(session_id: str):
        _get_or_404(session_id)
        try:
            return engine.debrief(session_id)
        except SessionStateError as err:
            raise HTTPException(status_code=409, detail=str(err))

    async def _run_realtime(websocket: WebSocket, session: SessionState):
        """Server-paced: one scripted step per dt of wall clock; client may abort."""
        async def watch_abort():
            while True:
                msg = await websocket.receive_json()
                if msg.get("type") == "abort":
                    return
        watcher = asyncio.create_task(watch_abort())
        try:
            while session.status == STATUS_RUNNING:
                done, _ = await asyncio.wait({watcher}, timeout=session.dt)
                if done:
                    engine.abort_session(session.session_id)
                    await websocket.send_json({"type": "abort_ack", "t": session.t,
                                               "status": session.status})
                    return
                record = engine.session_step(session.session_id)
                await websocket.send_json({"type": "telemetry", **record})
        finally:
            watcher.cancel()

    @app.websocket("/api/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str, pace: str = "lockstep"):
        await websocket.accept()
        try:
            session = engine.get(session_id)
        except KeyError:
            await websocket.send_json({"type": "error", "message": f"no session {session_id!r}"})
            await websocket.close()
            return
        try:
            if pace == "realtime":
                await _run_realtime(websocket, session)
                return
            while True:
                msg = await websocket.receive_json()
                kind = msg.get("type")
                if kind == "abort":
                    try:
                        engine.abort_session(session_id)
                    except SessionStateError as err:
                        await websocket.send_json({"type": "error", "message": str(err)})
                        continue
                    await websocket.send_json({"type": "abort_ack", "t": session.t,
                                               "status": session.status})
                elif kind == "step":
                    command = None
                    if session.mode == MODE_FREE:
                        command = PilotCommand(float(msg.get("aileron", 0.0)),
                                               float(msg.get("rudder", 0.0)))
                    try:
                        record = engine.session_step(session_id, command)
                    except (SessionStateError, ValueError) as err:
                        await websocket.send_json({"type": "error", "message": str(err)})
                        continue
                    await websocket.send_json({"type": "telemetry", **record})
                else:
                    await websocket.send_json(
                        {"type": "error", "message": f"unknown message type {kind!r}"})
        except WebSocketDisconnect:
            return

    return app


def app_from_files(artifact_path: str | Path, config: ExperimentConfig):
    monitor = load_monitor(artifact_path)
    return create_app(SessionEngine(monitor, config))
