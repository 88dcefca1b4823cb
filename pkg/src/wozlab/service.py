"""Transport-agnostic service core.

Owns the lobby, the live sessions and the log writers, and speaks the wire
protocol: inbound envelopes come in as JSON text, outbound envelopes are
queued per connection as JSON text. The ASGI layer and the scripted-agent
harness both drive exactly this surface, so every consumer exercises the
same codec and routing.

All entry points are serialized behind one lock: each session is a
single-writer state machine fed by its two connections and the tick source.
"""

from __future__ import annotations

import random
import threading
from collections import deque
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

from . import protocol
from .clock import WallClock
from .errors import (
    DuplicateJoin,
    DecodeError,
    WozError,
)
from .logstore import LogWriter
from .scenario import Scenario
from .session import (
    CloseReason,
    Lobby,
    Outbound,
    Participant,
    Phase,
    RewardConfig,
    Role,
    Session,
    SessionOutcome,
    compute_reward_cents,
    generate_token,
)


@dataclass
class ServiceConfig:
    log_dir: str = "logs"
    lobby_timeout_s: float = 300.0
    role_assignment: str = "queue"  # "queue" | "random"
    instruction_min_s: float = 30.0
    disconnect_grace_s: float = 30.0
    heartbeat_s: float = 10.0
    reward: RewardConfig = dc_field(default_factory=RewardConfig)
    admin_token: str = ""
    seed: Optional[int] = None  # seeds ids, role shuffling and per-session rngs


@dataclass
class _Connection:
    id: str
    participant_id: Optional[str] = None
    session_id: Optional[str] = None
    outbox: deque = dc_field(default_factory=deque)
    inbound_seq: int = -1
    outbound_seq: int = 0
    last_seen: float = 0.0
    open: bool = True
    waker: Optional[Callable[[], None]] = None


class WozService:
    def __init__(
        self,
        scenario: Scenario,
        config: ServiceConfig | None = None,
        clock=None,
        token_source: Callable[[], str] = generate_token,
    ):
        self.scenario = scenario
        self.config = config or ServiceConfig()
        self.clock = clock or WallClock()
        self.token_source = token_source
        self._rng = random.Random(self.config.seed)
        self._lock = threading.RLock()
        self._connections: dict[str, _Connection] = {}
        self._sessions: dict[str, Session] = {}
        self._writers: dict[str, LogWriter] = {}
        self._participant_session: dict[str, str] = {}
        self._lobby = Lobby(timeout_s=self.config.lobby_timeout_s)
        self._lobby_connections: dict[str, str] = {}  # participant id -> connection id
        self._conn_seq = 0
        self.started_at = self.clock.now()

    # --- id sources ---------------------------------------------------------

    def _new_id(self, prefix: str) -> str:
        return f"{prefix}-{self._rng.getrandbits(32):08x}"

    # --- connection plumbing --------------------------------------------------

    def open_connection(self) -> str:
        with self._lock:
            self._conn_seq += 1
            cid = f"c{self._conn_seq}"
            self._connections[cid] = _Connection(id=cid, last_seen=self.clock.now())
            return cid

    def poll(self, cid: str) -> list[str]:
        """Drain queued outbound envelope texts for one connection."""
        with self._lock:
            conn = self._connections.get(cid)
            if conn is None:
                return []
            out = list(conn.outbox)
            conn.outbox.clear()
            return out

    def set_waker(self, cid: str, waker: Callable[[], None]) -> None:
        with self._lock:
            conn = self._connections.get(cid)
            if conn is not None:
                conn.waker = waker

    def drop_connection(self, cid: str) -> None:
        """Transport-level close: start the reconnection grace window."""
        with self._lock:
            conn = self._connections.pop(cid, None)
            if conn is None:
                return
            conn.open = False
            now = self.clock.now()
            if conn.session_id:
                session = self._sessions.get(conn.session_id)
                if session and session.outcome is None:
                    role = session.role_of(conn.participant_id or "")
                    if role:
                        session.handle_disconnect(role, now)
            elif conn.participant_id:
                self._lobby.forget(conn.participant_id)
                self._lobby_connections.pop(conn.participant_id, None)

    # --- inbound ----------------------------------------------------------------

    def handle_text(self, cid: str, text: str | bytes) -> None:
        """Decode and route one inbound envelope; errors become notices."""
        with self._lock:
            conn = self._connections.get(cid)
            if conn is None:
                return
            now = self.clock.now()
            conn.last_seen = now
            # Any traffic proves liveness: revive a heartbeat-flagged participant.
            if conn.session_id and conn.participant_id:
                session = self._sessions.get(conn.session_id)
                if session and session.outcome is None:
                    role = session.role_of(conn.participant_id)
                    if role and not session.participant(role).connected:
                        session.handle_reconnect(role)
            try:
                env = protocol.decode(text)
            except DecodeError as exc:
                self._notice(conn, "error", str(exc), code="decode_error")
                return
            if env.seq <= conn.inbound_seq:
                self._notice(
                    conn,
                    "error",
                    f"seq {env.seq} is not greater than {conn.inbound_seq}",
                    code="bad_seq",
                )
                return
            conn.inbound_seq = env.seq
            try:
                self._dispatch(conn, env, now)
            except WozError as exc:
                # Non-fatal: surface to the offending client only.
                self._notice(conn, "error", str(exc), code=type(exc).__name__)

    # --- routing -----------------------------------------------------------------

    def _dispatch(self, conn: _Connection, env: protocol.Envelope, now: float) -> None:
        if env.type == "ping":
            self._push(conn, "pong", {}, session_id=conn.session_id)
            return
        if env.type == "join":
            self._handle_join(conn, env, now)
            return

        session = self._sessions.get(conn.session_id or "")
        if session is None:
            raise WozError("join first: connection is not in a session")
        role = session.role_of(conn.participant_id or "")
        if role is None:
            raise WozError("connection has no role in this session")

        if env.type == "ready":
            outs = session.mark_ready(role, now)
        elif env.type == "chat":
            if role is not Role.OPERATOR:
                raise WozError("only the operator sends 'chat'; wizards use 'free_text'")
            outs = session.handle_operator_message(str(env.payload.get("text", "")), now)
        elif env.type == "free_text":
            if role is not Role.WIZARD:
                raise WozError("only the wizard sends 'free_text'")
            outs = session.handle_wizard_free_text(str(env.payload.get("text", "")), now)
        elif env.type == "wizard_action":
            if role is not Role.WIZARD:
                raise WozError("only the wizard submits actions")
            slots = env.payload.get("slots") or {}
            if not isinstance(slots, dict):
                raise WozError("slots must be an object")
            outs = session.handle_wizard_action(
                str(env.payload["action"]), {str(k): str(v) for k, v in slots.items()}, now
            )
        elif env.type == "hint_request":
            if role is not Role.WIZARD:
                raise WozError("only the wizard requests hints")
            outs = session.request_hint(now)
        else:
            raise WozError(f"envelope type '{env.type}' is not a client message")

        self._deliver(session, outs)
        self._maybe_finalize(session)

    def _handle_join(self, conn: _Connection, env: protocol.Envelope, now: float) -> None:
        pid = env.payload.get("participant") or self._new_id("p")
        pid = str(pid)

        # Reconnect within the grace window.
        sid = self._participant_session.get(pid)
        if sid:
            session = self._sessions[sid]
            role = session.role_of(pid)
            participant = session.participant(role)
            if session.outcome is None and not participant.connected:
                conn.participant_id = pid
                conn.session_id = sid
                session.handle_reconnect(role)
                self._push_role_assigned(conn, session, role)
                if session.phase is Phase.PLAYING:
                    outs = [Outbound("both", "timer", session._timer_payload(now))]
                    if role is Role.WIZARD:
                        outs.append(session._options_outbound(now))
                    self._deliver(session, outs)
                return
            raise DuplicateJoin(f"participant '{pid}' is already in a session")

        if conn.participant_id is not None:
            raise DuplicateJoin("connection already joined")

        participant = Participant(id=pid, joined_at=now)
        pair = self._lobby.enqueue(participant)  # raises DuplicateJoin if queued twice
        conn.participant_id = pid
        if pair is None:
            self._lobby_connections[pid] = conn.id
            self._notice(
                conn, "info", "Waiting for a partner to join...", code="waiting"
            )
            return

        first, second = pair
        self._lobby_connections.pop(first.id, None)
        if self.config.role_assignment == "random" and self._rng.random() < 0.5:
            operator, wizard = second, first
        else:
            operator, wizard = first, second
        self._create_session(operator, wizard, now)

    def _create_session(
        self, operator: Participant, wizard: Participant, now: float
    ) -> Session:
        sid = self._new_id("s")
        session = Session(
            session_id=sid,
            scenario=self.scenario,
            operator=operator,
            wizard=wizard,
            rng=random.Random(self._rng.getrandbits(64)),
            created_at=now,
            instruction_min_s=self.config.instruction_min_s,
            reward_cfg=self.config.reward,
            token_source=self.token_source,
        )
        self._sessions[sid] = session
        self._participant_session[operator.id] = sid
        self._participant_session[wizard.id] = sid

        writer = LogWriter(
            base_dir=self.config.log_dir,
            session_id=sid,
            started_at=now,
            scenario_meta={"name": self.scenario.name, "hash": self.scenario.source_hash},
            participants=[
                {"id": operator.id, "role": Role.OPERATOR.value},
                {"id": wizard.id, "role": Role.WIZARD.value},
            ],
        )
        self._writers[sid] = writer
        session.set_event_sink(writer.append)

        for participant, role in ((operator, Role.OPERATOR), (wizard, Role.WIZARD)):
            conn = self._connection_for_participant(participant.id)
            if conn is not None:
                conn.session_id = sid
                self._push_role_assigned(conn, session, role)
                text = self.scenario.instructions.get(role.value)
                self._push(
                    conn,
                    "instructions",
                    {
                        "role": role.value,
                        "text": text.text if text else "",
                        "video_url": text.video_url if text else "",
                        "min_read_s": self.config.instruction_min_s,
                    },
                    session_id=sid,
                )
        return session

    def _push_role_assigned(self, conn: _Connection, session: Session, role: Role) -> None:
        self._push(
            conn,
            "role_assigned",
            {
                "role": role.value,
                "session": session.id,
                "participant": conn.participant_id,
                "scenario": self.scenario.metadata(),
            },
            session_id=session.id,
        )

    # --- time --------------------------------------------------------------------

    def tick(self) -> None:
        """Advance every session and the lobby to the clock's current instant."""
        with self._lock:
            now = self.clock.now()

            for participant in self._lobby.expired(now):
                conn_id = self._lobby_connections.pop(participant.id, None)
                conn = self._connections.get(conn_id or "")
                self._close_lobby_timeout(participant, conn, now)

            # Heartbeat liveness: two missed heartbeats signal a disconnect.
            horizon = 2 * self.config.heartbeat_s
            for conn in self._connections.values():
                if not conn.open or conn.session_id is None:
                    continue
                session = self._sessions.get(conn.session_id)
                if session is None or session.outcome is not None:
                    continue
                if now - conn.last_seen > horizon:
                    role = session.role_of(conn.participant_id or "")
                    if role and session.participant(role).connected:
                        session.handle_disconnect(role, now)

            for session in list(self._sessions.values()):
                if session.outcome is not None:
                    continue
                outs = session.tick(now, disconnect_grace_s=self.config.disconnect_grace_s)
                self._deliver(session, outs)
                self._maybe_finalize(session)

    def _close_lobby_timeout(
        self, participant: Participant, conn: Optional[_Connection], now: float
    ) -> None:
        """No partner arrived: the lone participant still earns the base pay."""
        sid = self._new_id("s")
        token = self.token_source()
        outcome = SessionOutcome(
            session_id=sid,
            reason=CloseReason.LOBBY_TIMEOUT,
            duration_played_s=0.0,
            resolved=False,
            progress={"located": False, "resolved": False, "assessed": False, "evacuated": False},
            disconnected=None,
            reward_cents=compute_reward_cents(0.0, False, self.config.reward),
            token=token,
        )
        writer = LogWriter(
            base_dir=self.config.log_dir,
            session_id=sid,
            started_at=now,
            scenario_meta={"name": self.scenario.name, "hash": self.scenario.source_hash},
            participants=[{"id": participant.id, "role": "unpaired"}],
        )
        writer.finalize(outcome.to_json())
        if conn is not None:
            self._push(
                conn,
                "session_end",
                {
                    "reason": CloseReason.LOBBY_TIMEOUT.value,
                    "resolved": False,
                    "token": token,
                    "reward_cents": outcome.reward_cents,
                    "duration_s": 0.0,
                    "questionnaire_url": "/questionnaire",
                },
                session_id=sid,
            )

    # --- outbound -------------------------------------------------------------------

    def _deliver(self, session: Session, outs: list[Outbound]) -> None:
        for out in outs:
            roles = (
                (Role.OPERATOR, Role.WIZARD)
                if out.target == "both"
                else (Role(out.target),)
            )
            for role in roles:
                participant = session.participant(role)
                conn = self._connection_for_participant(participant.id)
                if conn is not None and conn.open:
                    self._push(conn, out.type, out.payload, session_id=session.id)

    def _connection_for_participant(self, pid: str) -> Optional[_Connection]:
        for conn in self._connections.values():
            if conn.participant_id == pid and conn.open:
                return conn
        return None

    def _push(
        self, conn: _Connection, type_: str, payload: dict, session_id: Optional[str] = None
    ) -> None:
        env = protocol.Envelope(
            type=type_,
            seq=conn.outbound_seq,
            ts=self.clock.now(),
            payload=payload,
            session=session_id,
        )
        conn.outbound_seq += 1
        conn.outbox.append(protocol.encode(env))
        if conn.waker is not None:
            conn.waker()

    def _notice(self, conn: _Connection, level: str, text: str, code: str = "") -> None:
        payload = {"level": level, "text": text}
        if code:
            payload["code"] = code
        self._push(conn, "notice", payload, session_id=conn.session_id)

    def _maybe_finalize(self, session: Session) -> None:
        if session.outcome is None:
            return
        writer = self._writers.pop(session.id, None)
        if writer is not None:
            writer.finalize(session.outcome.to_json())

    # --- introspection (HTTP layer) ---------------------------------------------------

    def stats(self) -> dict:
        with self._lock:
            return {
                "sessions_live": sum(
                    1 for s in self._sessions.values() if s.outcome is None
                ),
                "sessions_total": len(self._sessions),
                "lobby_waiting": len(self._lobby),
                "uptime_s": round(self.clock.now() - self.started_at, 3),
            }

    def session_log_path(self, session_id: str) -> Optional[Path]:
        base = Path(self.config.log_dir)
        for path in sorted(base.rglob(f"{session_id}.json")):
            return path
        return None
