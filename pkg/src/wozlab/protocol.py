"""Wire protocol: JSON envelopes over one persistent bidirectional channel.

Every envelope carries a version tag, a type, a per-connection strictly
increasing sequence number, a server timestamp and a type-specific payload.
decode(encode(e)) is the identity for every valid envelope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import DecodeError

PROTOCOL_VERSION = 1

# type tag -> (required payload fields, optional payload fields)
ENVELOPE_TYPES: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    # client -> server
    "join": ((), ("participant", "resume")),
    "ready": ((), ()),
    "chat": (("text",), ("actor", "typed", "dialogue_act", "da_type")),
    "wizard_action": (("action",), ("slots",)),
    "free_text": (("text",), ()),
    "hint_request": ((), ()),
    "ping": ((), ()),
    # server -> client
    "role_assigned": (("role", "session"), ("participant", "scenario")),
    "instructions": (("role", "text"), ("video_url", "min_read_s")),
    "action_options": (("state", "options"), ("locked", "pending")),
    "hint_highlight": (("action",), ()),
    "world_event": (("event", "kind", "narration"), ("media_ref",)),
    "timer": (("remaining_s",), ("remaining", "phase")),
    "session_end": (("reason", "token"), ("resolved", "reward_cents", "duration_s", "questionnaire_url")),
    "notice": (("level", "text"), ("code",)),
    "pong": ((), ()),
}


@dataclass(frozen=True)
class Envelope:
    type: str
    seq: int
    ts: float
    payload: dict = field(default_factory=dict)
    session: Optional[str] = None
    v: int = PROTOCOL_VERSION


def encode(envelope: Envelope) -> str:
    """Envelope -> UTF-8 JSON text (compact, stable key order)."""
    doc: dict[str, Any] = {
        "v": envelope.v,
        "type": envelope.type,
        "seq": envelope.seq,
        "ts": envelope.ts,
    }
    if envelope.session is not None:
        doc["session"] = envelope.session
    doc["payload"] = envelope.payload
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def decode(text: str | bytes) -> Envelope:
    """Parse and validate one envelope; DecodeError names the offending field."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DecodeError("(document)", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DecodeError("(document)", "envelope must be a JSON object")
    return decode_dict(doc)


def decode_dict(doc: dict) -> Envelope:
    v = doc.get("v")
    if v != PROTOCOL_VERSION:
        raise DecodeError("v", f"unsupported protocol version {v!r}")

    type_tag = doc.get("type")
    if not isinstance(type_tag, str) or type_tag not in ENVELOPE_TYPES:
        raise DecodeError("type", f"unknown envelope type {type_tag!r}")

    seq = doc.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise DecodeError("seq", "seq must be a non-negative integer")

    ts = doc.get("ts")
    if not isinstance(ts, (int, float)) or isinstance(ts, bool):
        raise DecodeError("ts", "ts must be a number")

    session = doc.get("session")
    if session is not None and not isinstance(session, str):
        raise DecodeError("session", "session must be a string when present")

    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise DecodeError("payload", "payload must be an object")

    required, optional = ENVELOPE_TYPES[type_tag]
    for name in required:
        if name not in payload:
            raise DecodeError(f"payload.{name}", "required field missing")
    allowed = set(required) | set(optional)
    for name in payload:
        if name not in allowed:
            raise DecodeError(f"payload.{name}", f"unknown field for type '{type_tag}'")

    return Envelope(
        type=type_tag,
        seq=seq,
        ts=float(ts),
        payload=payload,
        session=session,
        v=PROTOCOL_VERSION,
    )


# Envelope types that must only ever be written to the wizard's connection.
WIZARD_ONLY_TYPES = frozenset({"action_options", "hint_highlight"})
