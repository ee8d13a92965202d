import json
import time

import pytest
from fastapi.testclient import TestClient

from gaitopt.server import PROTOCOL_VERSION, ServeSession, create_app
from test_sim import make_config

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


def command(ws, cmd_id, command, **kwargs):
    ws.send_text(json.dumps({
        "protocol_version": PROTOCOL_VERSION,
        "type": "command",
        "id": cmd_id,
        "command": command,
        **kwargs,
    }))


def next_frame(ws, ftype, timeout=30.0, predicate=None):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        frame = json.loads(ws.receive_text())
        if frame["type"] == ftype and (predicate is None or predicate(frame)):
            return frame
    raise TimeoutError(f"no {ftype} frame within {timeout}s")


@pytest.fixture
def session():
    s = ServeSession(make_config(steps=2), seed=0)
    s.speed = 50.0
    yield s
    s.shutdown()


@pytest.fixture
def client(session):
    app = create_app(session, frontend_dir=None)
    with TestClient(app) as c:
        yield c


class TestProtocol:
    def test_hello_and_status(self, client):
        with client.websocket_connect("/ws") as ws:
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            assert hello["protocol_version"] == PROTOCOL_VERSION
            assert hello["status"]["loaded"] == "test"

    def test_malformed_json_rejected(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()  # hello
            ws.send_text("{nope")
            frame = next_frame(ws, "error", timeout=5)
            assert "malformed" in frame["message"]

    def test_wrong_protocol_version(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"protocol_version": 99, "type": "command",
                                     "id": 1, "command": "start"}))
            frame = next_frame(ws, "error", timeout=5)
            assert "protocol_version" in frame["message"]

    def test_unknown_command_nacked(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 7, "explode")
            ack = next_frame(ws, "ack", timeout=5)
            assert ack["id"] == 7 and not ack["ok"]

    def test_http_status_endpoint(self, client):
        data = client.get("/api/status").json()
        assert data["type"] == "status"
        assert data["status"]["loaded"] == "test"


class TestRunControl:
    def test_start_streams_records(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "start")
            ack = next_frame(ws, "ack", timeout=5)
            assert ack["ok"]
            frame = next_frame(
                ws, "record", timeout=60,
                predicate=lambda f: f["record"]["kind"] == "replan",
            )
            assert frame["record"]["converged"]

    def test_pause_resume_continuous_time(self, client, session):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "start")
            next_frame(ws, "ack", timeout=5)
            next_frame(ws, "record", timeout=60,
                       predicate=lambda f: f["record"]["kind"] == "state")
            command(ws, 2, "pause")
            next_frame(ws, "ack", timeout=5)
            t_paused = session.sim.t
            time.sleep(0.3)
            assert session.sim.t == t_paused  # no ticks while paused
            command(ws, 3, "resume")
            ack = next_frame(ws, "ack", timeout=5)
            assert ack["ok"]
            deadline = time.monotonic() + 30
            while session.sim.t <= t_paused and time.monotonic() < deadline:
                time.sleep(0.05)
            assert session.sim.t > t_paused

    def test_speed_command(self, client, session):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "speed", value=2.0)
            ack = next_frame(ws, "ack", timeout=5)
            assert ack["ok"] and session.speed == 2.0
            command(ws, 2, "speed", value=1e6)
            ack = next_frame(ws, "ack", timeout=5)
            assert not ack["ok"]

    def test_disconnect_keeps_simulation_running(self, client, session):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "start")
            next_frame(ws, "ack", timeout=5)
        deadline = time.monotonic() + 60
        while not session.sim.finished and time.monotonic() < deadline:
            time.sleep(0.1)
        assert session.sim.finished  # ran to completion headless
        assert session.sim.log.query("replan")


class TestCommands:
    def test_set_heading_round_trip(self, client, session):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "set_heading", heading=[0.0, 1.0])
            ack = next_frame(ws, "ack", timeout=5)
            assert ack["ok"]
            command(ws, 2, "start")
            next_frame(ws, "ack", timeout=5)
            deadline = time.monotonic() + 30
            while time.monotonic() < deadline:
                if any(e["event"] == "set_heading"
                       for e in session.sim.log.query("event")):
                    break
                time.sleep(0.05)
            assert list(session.sim.goal.heading) == [0.0, 1.0]

    def test_relocate_unknown_id_rejected(self, client, session):
        with client.websocket_connect("/ws") as ws:
            ws.receive_text()
            command(ws, 1, "relocate", id_obstacle="ghost", center=[1.0, 0.0])
            ack = next_frame(ws, "ack", timeout=5)
            assert not ack["ok"]
            assert "ghost" in ack["error"]
