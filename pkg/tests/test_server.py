"""HTTP/WebSocket layer driven through the ASGI test client."""

import json

import pytest

pytest.importorskip("fastapi")
from starlette.testclient import TestClient

from wozlab.clock import VirtualClock
from wozlab.harness import HARNESS_EPOCH
from wozlab.protocol import WIZARD_ONLY_TYPES, decode, encode, Envelope
from wozlab.server import build_app
from wozlab.service import ServiceConfig, WozService
from wozlab.session import seeded_token_source


@pytest.fixture()
def rig(scenario, tmp_path):
    clock = VirtualClock(HARNESS_EPOCH)
    service = WozService(
        scenario,
        ServiceConfig(
            log_dir=str(tmp_path / "logs"),
            seed=1,
            instruction_min_s=0.0,
            admin_token="sekrit",
        ),
        clock,
        token_source=seeded_token_source(1),
    )
    app = build_app(
        service, assets_dir="scenarios/assets", tick_interval_s=None
    )
    return service, clock, TestClient(app)


class WsAgent:
    """Tiny synchronous wrapper over the test client's websocket."""

    def __init__(self, ws, clock):
        self.ws = ws
        self.clock = clock
        self.seq = 0
        self.received = []

    def send(self, type_, payload, session=None):
        env = Envelope(
            type=type_, seq=self.seq, ts=self.clock.now(), payload=payload, session=session
        )
        self.seq += 1
        self.ws.send_text(encode(env))

    def recv(self):
        env = decode(self.ws.receive_text())
        self.received.append(env)
        return env

    def recv_until(self, type_, limit=50):
        for _ in range(limit):
            env = self.recv()
            if env.type == type_:
                return env
        raise AssertionError(f"never received {type_}")


def test_health_and_scenario_endpoints(rig):
    service, clock, client = rig
    health = client.get("/health")
    assert health.status_code == 200
    assert health.json()["status"] == "ok"
    meta = client.get("/scenario")
    assert meta.status_code == 200
    body = meta.json()
    assert body["name"] == "offshore-emergency"
    assert body["verbal_acts"] == 40


def test_assets_served_as_static_files(rig):
    _, _, client = rig
    resp = client.get("/assets/fire_found.gif")
    assert resp.status_code == 200
    assert resp.content[:6] == b"GIF89a"
    assert client.get("/assets/nope.gif").status_code == 404


def test_ws_pairing_and_option_privacy(rig):
    service, clock, client = rig
    with client.websocket_connect("/ws") as op_ws, client.websocket_connect("/ws") as wiz_ws:
        op = WsAgent(op_ws, clock)
        wiz = WsAgent(wiz_ws, clock)
        op.send("join", {})
        assert op.recv().type == "notice"  # waiting for a partner
        wiz.send("join", {})

        op_role = op.recv_until("role_assigned")
        wiz_role = wiz.recv_until("role_assigned")
        assert op_role.payload["role"] == "operator"
        assert wiz_role.payload["role"] == "wizard"
        session_id = op_role.payload["session"]

        assert op.recv_until("instructions").payload["role"] == "operator"
        assert wiz.recv_until("instructions").payload["role"] == "wizard"

        op.send("ready", {}, session=session_id)
        wiz.send("ready", {}, session=session_id)

        # Game starts: both get a timer, only the wizard gets options.
        assert op.recv_until("timer").payload["phase"] == "playing"
        options = wiz.recv_until("action_options")
        assert [o["id"] for o in options.payload["options"]][0] == "intro_hello"

        wiz.send("wizard_action", {"action": "intro_hello", "slots": {}}, session=session_id)
        chat = op.recv_until("chat")
        assert chat.payload["text"].startswith("Hi, my name is Fred")
        wiz.recv_until("action_options")

        # Operator replies; the wizard sees it and a refreshed option set.
        op.send("chat", {"text": "hello Fred"}, session=session_id)
        assert wiz.recv_until("chat").payload["text"] == "hello Fred"
        wiz.recv_until("action_options")

        # Privacy: nothing wizard-only ever reached the operator.
        assert not ({e.type for e in op.received} & WIZARD_ONLY_TYPES)

        # Sequence numbers arrive gapless per connection.
        for agent in (op, wiz):
            seqs = [e.seq for e in agent.received]
            assert seqs == list(range(len(seqs)))


def test_ws_wrong_direction_messages_get_error_notice(rig):
    service, clock, client = rig
    with client.websocket_connect("/ws") as op_ws, client.websocket_connect("/ws") as wiz_ws:
        op = WsAgent(op_ws, clock)
        wiz = WsAgent(wiz_ws, clock)
        op.send("join", {})
        op.recv()
        wiz.send("join", {})
        op.recv_until("instructions")
        wiz.recv_until("instructions")
        op.send("ready", {})
        wiz.send("ready", {})
        wiz.recv_until("action_options")

        op.send("wizard_action", {"action": "intro_hello"})  # operators cannot act
        notice = op.recv_until("notice")
        assert notice.payload["level"] == "error"

        wiz.send("chat", {"text": "hi"})  # wizards use free_text
        notice = wiz.recv_until("notice")
        assert notice.payload["level"] == "error"


def test_ws_decode_error_notice(rig):
    _, clock, client = rig
    with client.websocket_connect("/ws") as ws:
        ws.send_text("{broken json")
        env = decode(ws.receive_text())
        assert env.type == "notice"
        assert env.payload["code"] == "decode_error"


def test_full_game_over_ws_to_token_and_questionnaire(rig, scenario):
    service, clock, client = rig
    with client.websocket_connect("/ws") as op_ws, client.websocket_connect("/ws") as wiz_ws:
        op = WsAgent(op_ws, clock)
        wiz = WsAgent(wiz_ws, clock)
        op.send("join", {})
        op.recv()
        wiz.send("join", {})
        op.recv_until("instructions")
        wiz.recv_until("instructions")
        op.send("ready", {})
        wiz.send("ready", {})
        wiz.recv_until("action_options")
        op.recv_until("timer")  # game is running on both connections

        # Ride the clock to the deadline; evacuation closes the session.
        clock.advance(361)
        service.tick()
        end_op = op.recv_until("session_end")
        end_wiz = wiz.recv_until("session_end")
        assert end_op.payload["reason"] == "evacuated"
        assert end_op.payload["token"] == end_wiz.payload["token"]
        token = end_op.payload["token"]

    resp = client.get(f"/token/{token}")
    assert resp.status_code == 200

    resp = client.post(
        "/questionnaire",
        json={"token": token, "q1": 5, "q2": 4, "q3": 3, "q4": 6, "free_text": "ok"},
    )
    assert resp.status_code == 200
    session_id = resp.json()["session"]

    dup = client.post(
        "/questionnaire", json={"token": token, "q1": 1, "q2": 1, "q3": 1, "q4": 1}
    )
    assert dup.status_code == 409

    bad = client.post(
        "/questionnaire", json={"token": token, "q1": 8, "q2": 1, "q3": 1, "q4": 1}
    )
    assert bad.status_code == 422

    missing = client.post(
        "/questionnaire", json={"token": "ZZZZZZZZZZ", "q1": 1, "q2": 1, "q3": 1, "q4": 1}
    )
    assert missing.status_code == 404

    # Admin log retrieval.
    no_auth = client.get(f"/logs/{session_id}")
    assert no_auth.status_code == 401
    ok = client.get(f"/logs/{session_id}", headers={"Authorization": "Bearer sekrit"})
    assert ok.status_code == 200
    doc = ok.json()
    assert doc["session_id"] == session_id
    assert doc["questionnaire"]["q1"] == 5


def test_frontend_bundle_served_when_built(scenario, tmp_path):
    import pathlib

    frontend = pathlib.Path("frontend")
    if not (frontend / "dist" / "app.js").exists():
        pytest.skip("frontend not built (run `tsc` in frontend/)")
    service = WozService(
        scenario,
        ServiceConfig(log_dir=str(tmp_path), seed=1),
        VirtualClock(HARNESS_EPOCH),
    )
    client = TestClient(
        build_app(service, assets_dir="scenarios/assets",
                  frontend_dir=frontend, tick_interval_s=None)
    )
    index = client.get("/")
    assert index.status_code == 200
    assert "message-form" in index.text
    assert client.get("/dist/app.js").status_code == 200
    assert client.get("/style.css").status_code == 200
    # API routes keep priority over the static mount.
    assert client.get("/health").status_code == 200
    assert client.get("/assets/fire_found.gif").status_code == 200


def test_admin_route_disabled_without_token(scenario, tmp_path):
    service = WozService(
        scenario,
        ServiceConfig(log_dir=str(tmp_path), seed=1),
        VirtualClock(HARNESS_EPOCH),
    )
    client = TestClient(build_app(service, tick_interval_s=None))
    assert client.get("/logs/s-x").status_code == 403


def test_world_events_carry_identifiers_not_media_bytes(rig, scenario):
    # Sends on different sockets land on different loops, so each step waits
    # for its effect before the next one fires (as any real client would).
    service, clock, client = rig
    with client.websocket_connect("/ws") as op_ws, client.websocket_connect("/ws") as wiz_ws:
        op = WsAgent(op_ws, clock)
        wiz = WsAgent(wiz_ws, clock)
        op.send("join", {})
        op.recv()
        wiz.send("join", {})
        op.recv_until("instructions")
        wiz.recv_until("instructions")
        op.send("ready", {})
        wiz.send("ready", {})
        wiz.recv_until("action_options")

        for act in ("intro_hello", "inform_alert_emergency", "request_robot_type"):
            wiz.send("wizard_action", {"action": act, "slots": {}})
            wiz.recv_until("action_options")
        op.send("chat", {"text": "quad 1 please"})
        options = wiz.recv_until("action_options")  # the unlock refresh
        assert options.payload["locked"] is False
        wiz.send("wizard_action", {"action": "inform_moving", "slots": {"robot": "quad copter 1"}})
        wiz.recv_until("action_options")
        clock.advance(10)
        service.tick()
        event = wiz.recv_until("world_event")
        assert event.payload["kind"] == "robot_arrived"
        ref = event.payload["media_ref"]
        assert isinstance(ref, str) and ref.endswith(".gif")
        # the identifier resolves over HTTP, the payload stays tiny
        assert len(encode(event)) < 1000
        assert client.get(f"/{ref}").status_code == 200
