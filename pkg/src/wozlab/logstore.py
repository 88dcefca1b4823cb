"""One JSON log per session: every event, world snapshots, auto metrics,
questionnaire linkage. Also the corpus loader the analysis runs on.

Durability: events are appended to a ``.events.jsonl`` journal and flushed
before the session loop is acknowledged; finalize() writes the single
``<session-id>.json`` atomically (temp file + rename) and removes the
journal. A crash before finalize leaves a recoverable journal behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    AlreadySubmitted,
    OutOfRange,
    StorageError,
    UnknownToken,
)

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "chat",
    "wizard_option",
    "wizard_free_text",
    "world_command",
    "milestone",
    "hint",
    "lock",
    "phase",
)


def _date_dir(base: Path, started_at: float) -> Path:
    day = datetime.fromtimestamp(started_at, tz=timezone.utc).strftime("%Y-%m-%d")
    return base / day


def count_words(text: str) -> int:
    """Whitespace tokens that contain at least one alphanumeric character."""
    return sum(1 for tok in text.split() if any(c.isalnum() for c in tok))


def compute_metrics(events: list[dict], outcome: Optional[dict]) -> dict:
    """The automatic metrics block; recomputable from the event list."""
    operator_turns = [e for e in events if e.get("kind") == "chat" and e.get("actor") == "operator"]
    wizard_msgs = [
        e
        for e in events
        if e.get("kind") in ("wizard_option", "wizard_free_text")
        and e.get("text") is not None
    ]
    typed = [e for e in wizard_msgs if e.get("typed")]

    op_lengths = [count_words(e.get("text", "")) for e in operator_turns]
    mean_len = sum(op_lengths) / len(op_lengths) if op_lengths else 0.0

    return {
        "turns_total": len(operator_turns) + len(wizard_msgs),
        "turns_operator": len(operator_turns),
        "turns_wizard": len(wizard_msgs),
        "operator_turn_length_words": round(mean_len, 6),
        "wizard_typed_fraction": round(len(typed) / len(wizard_msgs), 6) if wizard_msgs else 0.0,
        "duration_s": outcome.get("duration_played_s", 0.0) if outcome else 0.0,
        "disconnected": outcome.get("disconnected") if outcome else None,
        "resolved": bool(outcome.get("resolved")) if outcome else False,
    }


class LogWriter:
    """Single-writer event journal for one session."""

    def __init__(
        self,
        base_dir: str | Path,
        session_id: str,
        started_at: float,
        scenario_meta: dict,
        participants: list[dict],
    ):
        self.base_dir = Path(base_dir)
        self.session_id = session_id
        self.started_at = started_at
        self.scenario_meta = scenario_meta
        self.participants = participants
        self.dir = _date_dir(self.base_dir, started_at)
        self.journal_path = self.dir / f"{session_id}.events.jsonl"
        self.final_path = self.dir / f"{session_id}.json"
        self._events: list[dict] = []
        self._last_ts: float = float("-inf")
        self._journal = None
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            self._journal = open(self.journal_path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open journal for {session_id}: {exc}") from exc

    def append(self, event: dict) -> None:
        """Persist one event durably before returning to the session loop."""
        ts = event.get("ts")
        if ts is None or ts < self._last_ts:
            raise StorageError(
                f"event timestamps must be non-decreasing ({ts} after {self._last_ts})"
            )
        self._last_ts = ts
        self._events.append(event)
        if self._journal is None:
            raise StorageError("journal already finalized")
        try:
            self._journal.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
            self._journal.flush()
            os.fsync(self._journal.fileno())
        except OSError as exc:
            raise StorageError(f"cannot append event: {exc}") from exc

    def finalize(self, outcome: dict, questionnaire: Optional[dict] = None) -> Path:
        """Embed metrics, write ``<session-id>.json`` atomically, drop the journal."""
        doc = {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "scenario": self.scenario_meta,
            "participants": self.participants,
            "started_at": self.started_at,
            "events": self._events,
            "outcome": outcome,
            "metrics": compute_metrics(self._events, outcome),
        }
        if questionnaire is not None:
            doc["questionnaire"] = questionnaire
        try:
            write_log_file(self.final_path, doc)
            if self._journal is not None:
                self._journal.close()
                self._journal = None
            self.journal_path.unlink(missing_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot finalize log: {exc}") from exc
        return self.final_path

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None


def write_log_file(path: Path, doc: dict) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, sort_keys=True, indent=1)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def recover_journal(journal_path: str | Path) -> list[dict]:
    """Events acknowledged before a crash; tolerates a torn final line."""
    events = []
    with open(journal_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                break  # torn tail write: everything before it was acknowledged
    return events


# --------------------------------------------------------------------------
# corpus loading


@dataclass
class LoadedLog:
    path: Path
    doc: dict

    @property
    def session_id(self) -> str:
        return self.doc["session_id"]

    @property
    def events(self) -> list[dict]:
        return self.doc["events"]

    @property
    def metrics(self) -> dict:
        return self.doc["metrics"]

    @property
    def outcome(self) -> dict:
        return self.doc["outcome"]


@dataclass
class Corpus:
    logs: list[LoadedLog]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.logs)


def _check_log(doc: dict) -> None:
    for key in ("session_id", "events", "outcome", "metrics"):
        if key not in doc:
            raise ValueError(f"missing top-level key '{key}'")
    events = doc["events"]
    last_ts = float("-inf")
    prev_state_after = None
    for i, ev in enumerate(events):
        ts = ev.get("ts")
        if ts is None or ts < last_ts:
            raise ValueError(f"events[{i}]: timestamps out of order")
        last_ts = ts
        if ev.get("kind") not in EVENT_KINDS:
            raise ValueError(f"events[{i}]: unknown kind {ev.get('kind')!r}")
        if ev.get("kind") in ("wizard_option", "wizard_free_text"):
            before = ev.get("fsm_state_before")
            if prev_state_after is not None and before != prev_state_after:
                raise ValueError(
                    f"events[{i}]: fsm_state_before {before!r} does not chain from "
                    f"previous fsm_state_after {prev_state_after!r}"
                )
            prev_state_after = ev.get("fsm_state_after")
    recomputed = compute_metrics(events, doc.get("outcome"))
    if recomputed != doc["metrics"]:
        raise ValueError(
            f"embedded metrics do not match recomputation: {doc['metrics']} != {recomputed}"
        )


def load_log(path: str | Path) -> LoadedLog:
    """Load and cross-check one finalized log. Raises ValueError on mismatch."""
    p = Path(path)
    with open(p, encoding="utf-8") as f:
        doc = json.load(f)
    _check_log(doc)
    return LoadedLog(path=p, doc=doc)


def iter_log_files(directory: str | Path) -> Iterable[Path]:
    base = Path(directory)
    yield from sorted(
        p for p in base.rglob("*.json") if not p.name.endswith(".events.jsonl")
    )


def load_corpus(directory: str | Path) -> Corpus:
    """Load every finalized log under a directory.

    Malformed files are reported and skipped, never fatal; each loaded log's
    metrics block has been re-derived from its events and cross-checked.
    """
    logs: list[LoadedLog] = []
    skipped: list[tuple[str, str]] = []
    for path in iter_log_files(directory):
        try:
            logs.append(load_log(path))
        except (json.JSONDecodeError, ValueError, OSError) as exc:
            skipped.append((str(path), str(exc)))
    return Corpus(logs=logs, skipped=skipped)


# --------------------------------------------------------------------------
# token lookup and questionnaire submission


def find_log_by_token(directory: str | Path, token: str) -> Optional[Path]:
    for path in iter_log_files(directory):
        try:
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
        except (json.JSONDecodeError, OSError):
            continue
        if doc.get("outcome", {}).get("token") == token:
            return path
    return None


def verify_token(directory: str | Path, token: str) -> Optional[str]:
    """The payment check: does a dialogue file carry this token?

    Returns the session id, or None when no log matches.
    """
    path = find_log_by_token(directory, token)
    if path is None:
        return None
    with open(path, encoding="utf-8") as f:
        return json.load(f)["session_id"]


def submit_questionnaire(
    directory: str | Path,
    token: str,
    answers: list[int],
    free_text: str = "",
) -> str:
    """Attach questionnaire answers to the session log matching the token.

    Four 7-point answers; duplicate submissions are rejected. Returns the
    session id the answers were linked to.
    """
    if len(answers) != 4:
        raise OutOfRange("exactly four answers (Q1-Q4) are required")
    for i, a in enumerate(answers, start=1):
        if not isinstance(a, int) or not 1 <= a <= 7:
            raise OutOfRange(f"Q{i} must be an integer between 1 and 7, got {a!r}")

    path = find_log_by_token(directory, token)
    if path is None:
        raise UnknownToken(f"no session log carries token '{token}'")
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("questionnaire") is not None:
        raise AlreadySubmitted(f"questionnaire for token '{token}' already recorded")
    doc["questionnaire"] = {
        "q1": answers[0],
        "q2": answers[1],
        "q3": answers[2],
        "q4": answers[3],
        "free_text": free_text,
    }
    write_log_file(path, doc)
    return doc["session_id"]
