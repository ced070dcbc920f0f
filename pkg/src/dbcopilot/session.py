"""Conversation trajectory model: sessions, turns, observations.

A session is an append-only log of turns. Every other component reads and
writes trajectories through this module, and sessions serialize to a stable
JSON form (one object per turn with a ``kind`` discriminator) used for audit
logs and golden-trajectory tests.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import EmptySession, IndexMismatch, SessionClosed


class SessionStatus(str, Enum):
    IDLE = "idle"
    REASONING = "reasoning"
    AWAITING_CONFIRMATION = "awaiting_confirmation"
    EXECUTING = "executing"
    CLOSED = "closed"


class Actor(str, Enum):
    USER = "user"
    AGENT = "agent"
    TOOL = "tool"
    SYSTEM = "system"


class TurnKind(str, Enum):
    USER_MESSAGE = "user_message"
    REASONING = "reasoning"
    TOOL_CALL = "tool_call"
    TOOL_RESULT = "tool_result"
    PLAN_PROPOSAL = "plan_proposal"
    CONFIRMATION_REQUEST = "confirmation_request"
    CONFIRMATION_REPLY = "confirmation_reply"
    FINAL_ANSWER = "final_answer"
    ERROR = "error"


class TurnCountingPolicy(str, Enum):
    """How to count "interaction turns" for efficiency reporting.

    The three candidate counters are all computable so reports can state
    which definition they used instead of baking one in.
    """

    USER_MESSAGES = "user_messages"
    USER_MESSAGES_EXCLUDING_STANDARDIZED_APPROVALS = (
        "user_messages_excluding_standardized_approvals"
    )
    SQL_EXECUTION_ATTEMPTS = "sql_execution_attempts"


class ObservationSource(str, Enum):
    QUERY_RESULT = "query_result"
    DB_ERROR = "db_error"
    TOOL_OUTPUT = "tool_output"
    USER_REPLY = "user_reply"


# Replies that count as a standardized approval of a proposed plan.
STANDARD_APPROVALS = frozenset({"yes", "y", "proceed", "yes, proceed", "confirm"})

# Row-set observations are truncated to this many rows by default; prompts
# have bounded size so large results carry an explicit truncated flag.
MAX_OBSERVATION_ROWS = 1000

# Tools whose invocation counts as one SQL execution attempt.
SQL_EXECUTION_TOOLS = frozenset({"execute_query", "execute_non_query"})


def normalize_reply(text: str) -> str:
    """Canonical form of a user reply for approval matching."""
    collapsed = re.sub(r"\s+", " ", text.strip().lower())
    return collapsed.rstrip(".!")


def is_standard_approval(text: str, approvals: Iterable[str] | None = None) -> bool:
    allowed = frozenset(approvals) if approvals is not None else STANDARD_APPROVALS
    return normalize_reply(text) in allowed


@dataclass
class Observation:
    """Outcome of one action, fed back into the next reasoning step."""

    source: ObservationSource
    content: Any
    truncated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source.value,
            "content": self.content,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Observation":
        return cls(
            source=ObservationSource(data["source"]),
            content=data["content"],
            truncated=bool(data.get("truncated", False)),
        )


@dataclass
class Turn:
    index: int
    actor: Actor
    kind: TurnKind
    payload: dict[str, Any] = field(default_factory=dict)
    timestamp: float = field(default_factory=time.time)

    def to_dict(self, include_timestamps: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "index": self.index,
            "actor": self.actor.value,
            "kind": self.kind.value,
            "payload": self.payload,
        }
        if include_timestamps:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Turn":
        return cls(
            index=int(data["index"]),
            actor=Actor(data["actor"]),
            kind=TurnKind(data["kind"]),
            payload=dict(data.get("payload", {})),
            timestamp=float(data.get("timestamp", 0.0)),
        )


@dataclass
class Session:
    """One conversation with one database. Single-writer: whoever holds the
    session appends; handing it to another executor transfers that right."""

    id: str
    db_ref: str
    turns: list[Turn] = field(default_factory=list)
    status: SessionStatus = SessionStatus.IDLE
    created_at: float = field(default_factory=time.time)
    # Invoked after every append; used by the service layer to fan out events.
    # Not part of the serialized form.
    on_append: Callable[["Turn"], None] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def next_index(self) -> int:
        return len(self.turns)

    def last_turn(self) -> Turn | None:
        return self.turns[-1] if self.turns else None


def append_turn(session: Session, turn: Turn) -> Session:
    """Append one turn. Prior turns are never touched; indices never reused."""
    if session.status is SessionStatus.CLOSED:
        raise SessionClosed(f"session {session.id} is closed")
    if turn.index != len(session.turns):
        raise IndexMismatch(
            f"expected index {len(session.turns)}, got {turn.index}"
        )
    session.turns.append(turn)
    if session.on_append is not None:
        session.on_append(turn)
    return session


def record(
    session: Session,
    actor: Actor,
    kind: TurnKind,
    payload: dict[str, Any] | None = None,
) -> Turn:
    """Convenience wrapper: build a turn at the next index and append it."""
    turn = Turn(
        index=session.next_index,
        actor=actor,
        kind=kind,
        payload=payload or {},
    )
    append_turn(session, turn)
    return turn


def count_interaction_turns(
    session: Session,
    policy: TurnCountingPolicy,
    approvals: Iterable[str] | None = None,
) -> int:
    """Count turns under the given policy. Deterministic for a fixed trajectory."""
    if not any(t.kind is TurnKind.USER_MESSAGE for t in session.turns):
        raise EmptySession(f"session {session.id} has no user message")

    if policy is TurnCountingPolicy.SQL_EXECUTION_ATTEMPTS:
        return sum(
            1
            for t in session.turns
            if t.kind is TurnKind.TOOL_CALL
            and t.payload.get("tool") in SQL_EXECUTION_TOOLS
        )

    count = 0
    for t in session.turns:
        if t.actor is not Actor.USER:
            continue
        if t.kind is TurnKind.USER_MESSAGE:
            count += 1
        elif t.kind is TurnKind.CONFIRMATION_REPLY:
            if policy is TurnCountingPolicy.USER_MESSAGES:
                count += 1
            elif not is_standard_approval(str(t.payload.get("text", "")), approvals):
                count += 1
    return count


def session_to_dict(session: Session, include_timestamps: bool = True) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": session.id,
        "db_ref": session.db_ref,
        "status": session.status.value,
        "turns": [t.to_dict(include_timestamps) for t in session.turns],
    }
    if include_timestamps:
        out["created_at"] = session.created_at
    return out


def session_from_dict(data: dict[str, Any]) -> Session:
    return Session(
        id=str(data["id"]),
        db_ref=str(data["db_ref"]),
        turns=[Turn.from_dict(t) for t in data.get("turns", [])],
        status=SessionStatus(data.get("status", "idle")),
        created_at=float(data.get("created_at", 0.0)),
    )


def serialize_session(session: Session, include_timestamps: bool = True) -> str:
    """Stable JSON form. With include_timestamps=False the output is the
    canonical shape used by trajectory-reproducibility checks."""
    return json.dumps(
        session_to_dict(session, include_timestamps), sort_keys=True, indent=2
    )


def dump_session(session: Session, path: str | Path) -> Path:
    """Write one session as line-delimited JSON: a header line, then one
    object per turn."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "id": session.id,
            "db_ref": session.db_ref,
            "status": session.status.value,
            "created_at": session.created_at,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for turn in session.turns:
            fh.write(json.dumps(turn.to_dict(), sort_keys=True) + "\n")
    return path


def load_session(path: str | Path) -> Session:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"empty session log: {path}")
    header = json.loads(lines[0])
    session = Session(
        id=header["id"],
        db_ref=header["db_ref"],
        status=SessionStatus(header["status"]),
        created_at=float(header.get("created_at", 0.0)),
    )
    for line in lines[1:]:
        session.turns.append(Turn.from_dict(json.loads(line)))
    return session
