"""Live simulation service: JSON frames over a websocket, static console UI.

Frames (server to client) and commands (client to server) are JSON objects
with a mandatory protocol_version field.  Outbound frame types: hello,
record (one simulation log record), status, ack, error.  Inbound commands:
load, start, pause, resume, speed, relocate, set_heading, status.

The simulation advances on a worker thread paced against the wall clock
times the playback speed; commands are serialized into the simulation loop
between control ticks, so a relocation over the API behaves exactly like a
scripted one.  Client disconnects never stop the simulation.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .scenario import SHIPPED_SCENARIOS, ScenarioConfig
from .sim import Simulation, SimulationLog

PROTOCOL_VERSION = 1
FRAME_FLUSH_SECONDS = 0.02  # >= 20 Hz outbound flushing
MAX_QUEUED_FRAMES = 50000
TICK_BURST_LIMIT = 0.25  # max simulated seconds per pacing slice


class ServeSession:
    """Owns the simulation worker and fans records out to subscribers."""

    def __init__(self, config: ScenarioConfig | None = None, seed: int = 0,
                 log_path=None):
        self.lock = threading.RLock()
        self.sim: Simulation | None = None
        self.config = None
        self.seed = seed
        self.log_path = log_path
        self.running = False
        self.paused = False
        self.speed = 1.0
        self.subscribers: list[queue.Queue] = []
        self._stop = False
        self._log_dumped = False
        if config is not None:
            self._load(config, seed)
        self.thread = threading.Thread(target=self._worker, daemon=True)
        self.thread.start()

    # -- subscriber management ----------------------------------------------

    def subscribe(self) -> queue.Queue:
        q = queue.Queue()
        with self.lock:
            self.subscribers.append(q)
            if self.sim is not None:
                for record in self.sim.log.records:
                    q.put_nowait(record)
        return q

    def unsubscribe(self, q: queue.Queue):
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def _broadcast(self, record: dict):
        with self.lock:
            for q in self.subscribers:
                if q.qsize() < MAX_QUEUED_FRAMES:
                    q.put_nowait(record)

    # -- lifecycle ------------------------------------------------------------

    def _load(self, config: ScenarioConfig, seed: int):
        self.config = config
        self.seed = seed
        self.sim = Simulation(config, seed=seed)
        self.sim.log.listeners.append(self._broadcast)
        for record in self.sim.log.records:
            self._broadcast(record)
        self.running = False
        self.paused = False
        self._log_dumped = False

    def status(self) -> dict:
        with self.lock:
            sim = self.sim
            return {
                "loaded": self.config.name if self.config else None,
                "running": self.running,
                "paused": self.paused,
                "speed": self.speed,
                "t": sim.t if sim else 0.0,
                "steps_done": sim.steps_done if sim else 0,
                "steps_total": self.config.steps if self.config else 0,
                "finished": sim.finished if sim else False,
                "scenarios": list(SHIPPED_SCENARIOS),
            }

    def shutdown(self):
        self._stop = True

    # -- command surface -------------------------------------------------------

    def handle_command(self, cmd: dict) -> dict:
        """Apply one validated client command; returns the ack payload."""
        kind = cmd.get("command")
        with self.lock:
            if kind == "load":
                name = cmd["scenario"]
                path = Path(name)
                config = (
                    ScenarioConfig.from_file(path)
                    if path.exists()
                    else ScenarioConfig.shipped(name)
                )
                self._load(config, int(cmd.get("seed", 0)))
                return {"loaded": config.name}
            if self.sim is None:
                raise ValueError("no scenario loaded")
            if kind == "start":
                self.running = True
                self.paused = False
                return {"running": True}
            if kind == "pause":
                self.paused = True
                return {"paused": True}
            if kind == "resume":
                self.paused = False
                return {"paused": False}
            if kind == "speed":
                value = float(cmd["value"])
                if not (0.01 <= value <= 100.0):
                    raise ValueError("speed must lie in [0.01, 100]")
                self.speed = value
                return {"speed": value}
            if kind == "relocate":
                self.sim.terrain.find_obstacle(cmd["id_obstacle"])  # KeyError if unknown
                self.sim.queue_command(
                    {"command": "relocate", "id": cmd["id_obstacle"],
                     "center": cmd["center"], "source": "api"}
                )
                return {"queued": True}
            if kind == "set_heading":
                self.sim.queue_command(
                    {"command": "set_heading", "heading": cmd["heading"],
                     "source": "api"}
                )
                return {"queued": True}
            if kind == "status":
                return self.status()
        raise ValueError(f"unknown command {kind!r}")

    # -- worker -----------------------------------------------------------------

    def _worker(self):
        last_wall = time.monotonic()
        while not self._stop:
            time.sleep(0.004)
            now = time.monotonic()
            advance = (now - last_wall) * self.speed
            last_wall = now
            # one lock span per burst: a concurrent load cannot swap the
            # simulation out from under the tick loop
            with self.lock:
                sim = self.sim
                if (
                    sim is None
                    or not self.running
                    or self.paused
                    or sim.finished
                ):
                    continue
                target = sim.t + min(advance, TICK_BURST_LIMIT)
                while sim.t < target and not sim.finished:
                    sim.tick()
                if sim.finished and self.log_path and not self._log_dumped:
                    sim.log.dump_jsonl(self.log_path)
                    self._log_dumped = True


def _frame(ftype: str, **payload) -> dict:
    out = {"protocol_version": PROTOCOL_VERSION, "type": ftype}
    out.update(payload)
    return out


def create_app(session: ServeSession, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="gaitopt console API")
    app.state.session = session

    @app.get("/api/status")
    def get_status():
        return _frame("status", status=session.status())

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket):
        import asyncio

        await ws.accept()
        await ws.send_text(json.dumps(_frame("hello", status=session.status())))
        q = session.subscribe()
        stop = False

        async def writer():
            while not stop:
                sent = 0
                while sent < 500:
                    try:
                        record = q.get_nowait()
                    except queue.Empty:
                        break
                    await ws.send_text(json.dumps(_frame("record", record=record)))
                    sent += 1
                await ws.send_text(json.dumps(_frame("status", status=session.status())))
                await asyncio.sleep(FRAME_FLUSH_SECONDS)

        writer_task = asyncio.create_task(writer())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    cmd = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(_frame("error", message="malformed JSON")))
                    continue
                if cmd.get("protocol_version") != PROTOCOL_VERSION:
                    await ws.send_text(json.dumps(_frame(
                        "error", message=f"protocol_version must be {PROTOCOL_VERSION}"
                    )))
                    continue
                if cmd.get("type") != "command":
                    await ws.send_text(json.dumps(_frame("error", message="expected a command frame")))
                    continue
                cmd_id = cmd.get("id")
                try:
                    result = session.handle_command(cmd)
                    await ws.send_text(json.dumps(_frame("ack", id=cmd_id, ok=True, result=result)))
                except (KeyError, ValueError, FileNotFoundError) as exc:
                    await ws.send_text(json.dumps(_frame("ack", id=cmd_id, ok=False, error=str(exc))))
        except WebSocketDisconnect:
            pass
        finally:
            stop = True
            writer_task.cancel()
            session.unsubscribe(q)

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    if frontend_dir:
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="console")
    return app


def serve(config: ScenarioConfig, port: int, seed: int = 0, log_path=None):
    """Blocking entry point: serve a loaded scenario on the given port."""
    import uvicorn

    session = ServeSession(config, seed=seed, log_path=log_path)
    app = create_app(session)
    print(f"console API on ws://127.0.0.1:{port}/ws (scenario {config.name})")
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


class _ReplaySession(ServeSession):
    """Streams a prerecorded log at wall-clock pace instead of simulating."""

    def __init__(self, log: SimulationLog):
        # set before super(): the worker thread starts in there
        self._records = list(log.records)
        self._cursor = 0
        self._clock = 0.0
        super().__init__(config=None)

    def status(self) -> dict:
        return {
            "loaded": "replay",
            "running": self.running,
            "paused": self.paused,
            "speed": self.speed,
            "t": self._clock,
            "steps_done": 0,
            "steps_total": 0,
            "finished": self._cursor >= len(self._records),
            "scenarios": [],
        }

    def handle_command(self, cmd: dict) -> dict:
        kind = cmd.get("command")
        with self.lock:
            if kind == "start":
                self.running = True
                return {"running": True}
            if kind == "pause":
                self.paused = True
                return {"paused": True}
            if kind == "resume":
                self.paused = False
                return {"paused": False}
            if kind == "speed":
                self.speed = float(cmd["value"])
                return {"speed": self.speed}
            if kind == "status":
                return self.status()
        raise ValueError(f"replay does not support command {kind!r}")

    def _worker(self):
        last_wall = time.monotonic()
        while not self._stop:
            time.sleep(0.005)
            now = time.monotonic()
            advance = (now - last_wall) * self.speed
            last_wall = now
            with self.lock:
                if not self.running or self.paused:
                    continue
                self._clock += advance
                while (
                    self._cursor < len(self._records)
                    and self._records[self._cursor]["t"] <= self._clock
                ):
                    self._broadcast(self._records[self._cursor])
                    self._cursor += 1


def serve_replay(log: SimulationLog, port: int):
    import uvicorn

    session = _ReplaySession(log)
    app = create_app(session)
    print(f"replaying {len(log.records)} records on ws://127.0.0.1:{port}/ws")
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
