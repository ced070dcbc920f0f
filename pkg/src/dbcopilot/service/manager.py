"""Session orchestration behind the HTTP API.

One SessionService owns all live sessions. Each session gets its own engine,
database connection, and an append-only event log that mirrors the session's
turns one-to-one (seq == turn index, gapless by construction), so any client
can replay from an arbitrary seq and reconstruct the exact trajectory.
Per-session work is serialized by a busy flag; events fan out to any number
of stream readers.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable

from ..config import AppConfig
from ..dbadapter import Database
from ..engine import AgentRuntime, ReactEngine, make_runtime
from ..errors import (
    ConfigError,
    NoSuchSession,
    ProviderError,
    SessionBusy,
    UnknownDatabase,
)
from ..llm import Backend, HttpBackend, ScriptedBackend
from ..session import Actor, Session, SessionStatus, Turn, TurnKind, record

EVENT_TYPE_BY_KIND = {
    TurnKind.USER_MESSAGE: "status",
    TurnKind.REASONING: "reasoning",
    TurnKind.TOOL_CALL: "tool_call",
    TurnKind.TOOL_RESULT: "tool_result",
    TurnKind.PLAN_PROPOSAL: "plan_proposal",
    TurnKind.CONFIRMATION_REQUEST: "confirmation_request",
    TurnKind.CONFIRMATION_REPLY: "status",
    TurnKind.FINAL_ANSWER: "answer",
    TurnKind.ERROR: "error",
}


@dataclass(frozen=True)
class AgentEvent:
    session_id: str
    seq: int
    type: str
    body: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "type": self.type,
            "body": self.body,
        }


def event_from_turn(session_id: str, turn: Turn) -> AgentEvent:
    body = dict(turn.payload)
    body["kind"] = turn.kind.value
    body["actor"] = turn.actor.value
    return AgentEvent(
        session_id=session_id,
        seq=turn.index,
        type=EVENT_TYPE_BY_KIND[turn.kind],
        body=body,
    )


@dataclass
class _LiveSession:
    session: Session
    engine: ReactEngine
    database: Database
    events: list[AgentEvent] = field(default_factory=list)
    busy: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def backend_factory_from_config(config: AppConfig) -> Callable[[], Backend]:
    llm = config.llm
    if llm.backend == "scripted":
        if not llm.script:
            raise ConfigError("[llm] backend=scripted requires [llm] script")
        return lambda: ScriptedBackend.from_file(llm.script)
    if llm.backend == "http":
        return lambda: HttpBackend(
            base_url_env=llm.base_url_env,
            api_key_env=llm.api_key_env,
            model_env=llm.model_env,
            model=llm.model,
        )
    raise ConfigError(f"unknown [llm] backend: {llm.backend!r}")


class SessionService:
    """The service facade the HTTP routes (and the CLI's local mode) call."""

    def __init__(
        self,
        config: AppConfig,
        backend_factory: Callable[[], Backend] | None = None,
    ) -> None:
        self.config = config
        self._backend_factory = backend_factory or backend_factory_from_config(config)
        self._sessions: dict[str, _LiveSession] = {}
        self._registry_lock = threading.Lock()
        self._events = threading.Condition()

    # ── databases ──────────────────────────────────────────────────────

    def list_databases(self) -> list[dict[str, Any]]:
        out = []
        for name, url in sorted(self.config.databases.items()):
            db = Database.connect(url)
            try:
                tables = db.list_tables()
            finally:
                db.close()
            out.append({"name": name, "tables": tables})
        return out

    # ── session lifecycle ──────────────────────────────────────────────

    def create_session(self, db_ref: str) -> dict[str, Any]:
        url = self.config.databases.get(db_ref)
        if url is None:
            raise UnknownDatabase(f"unknown database: {db_ref}")
        database = Database.connect(url)
        runtime = self._build_runtime(database)
        engine = ReactEngine(runtime)
        session_id = uuid.uuid4().hex[:12]
        live = _LiveSession(
            session=Session(id=session_id, db_ref=db_ref),
            engine=engine,
            database=database,
        )
        live.session.on_append = self._listener(live)
        with self._registry_lock:
            self._sessions[session_id] = live
        return self._describe(live)

    def _build_runtime(self, database: Database) -> AgentRuntime:
        stats = database.table_row_counts() if self.config.safety.collect_stats else None
        return make_runtime(
            database,
            self._backend_factory(),
            config=self.config.engine,
            lexicon=self.config.safety.lexicon(),
            approvals=self.config.safety.approval_set(),
            stats=stats,
        )

    def _listener(self, live: _LiveSession):
        def on_append(turn: Turn) -> None:
            event = event_from_turn(live.session.id, turn)
            with self._events:
                live.events.append(event)
                self._events.notify_all()

        return on_append

    def _live(self, session_id: str) -> _LiveSession:
        live = self._sessions.get(session_id)
        if live is None:
            raise NoSuchSession(session_id)
        return live

    def _describe(self, live: _LiveSession) -> dict[str, Any]:
        return {
            "session_id": live.session.id,
            "db_ref": live.session.db_ref,
            "status": live.session.status.value,
            "turn_count": len(live.session.turns),
            "tables": live.database.list_tables(),
        }

    def get_session(self, session_id: str) -> dict[str, Any]:
        return self._describe(self._live(session_id))

    def get_session_schema(self, session_id: str) -> dict[str, Any]:
        """Full introspected schema of the session's database, for schema
        browsers. Immutable snapshot; recomputed per call."""
        live = self._live(session_id)
        tables = []
        for name in live.database.list_tables():
            schema = live.database.get_table_schema(name)
            tables.append(
                {
                    "name": schema.name,
                    "columns": [
                        {
                            "name": c.name,
                            "declared_type": c.declared_type,
                            "nullable": c.nullable,
                            "is_primary_key": c.is_primary_key,
                        }
                        for c in schema.columns
                    ],
                    "constraints": [
                        {
                            "kind": c.kind,
                            "columns": list(c.columns),
                            "referenced_table": c.referenced_table,
                            "referenced_columns": (
                                list(c.referenced_columns)
                                if c.referenced_columns
                                else None
                            ),
                        }
                        for c in schema.constraints
                    ],
                }
            )
        return {
            "session_id": live.session.id,
            "db_ref": live.session.db_ref,
            "tables": tables,
        }

    def close_session(self, session_id: str) -> None:
        live = self._live(session_id)
        live.session.status = SessionStatus.CLOSED
        live.database.close()
        with self._registry_lock:
            self._sessions.pop(session_id, None)

    # ── messaging ──────────────────────────────────────────────────────

    def post_message(self, session_id: str, text: str) -> int:
        """Accept one message; engine work happens on a worker thread and
        events appear on the stream as turns are recorded."""
        live = self._live(session_id)
        with live.lock:
            if live.busy:
                raise SessionBusy(f"session {session_id} is processing a message")
            if live.session.status not in (
                SessionStatus.IDLE,
                SessionStatus.AWAITING_CONFIRMATION,
            ):
                raise SessionBusy(
                    f"session {session_id} is {live.session.status.value}"
                )
            live.busy = True
        seq_start = len(live.events)
        worker = threading.Thread(
            target=self._process, args=(live, text), daemon=True
        )
        worker.start()
        return seq_start

    def _process(self, live: _LiveSession, text: str) -> None:
        session = live.session
        try:
            if session.status is SessionStatus.AWAITING_CONFIRMATION:
                live.engine.resume_with_confirmation(session, text)
            else:
                live.engine.run_turn(session, text)
        except ProviderError:
            pass  # the engine already recorded the error turn
        except Exception as exc:
            last = session.last_turn()
            if last is None or last.kind is not TurnKind.ERROR:
                record(
                    session,
                    Actor.SYSTEM,
                    TurnKind.ERROR,
                    {"text": f"{type(exc).__name__}: {exc}"},
                )
            if session.status in (SessionStatus.REASONING, SessionStatus.EXECUTING):
                session.status = SessionStatus.IDLE
        finally:
            with live.lock:
                live.busy = False
            with self._events:
                self._events.notify_all()

    # ── events ─────────────────────────────────────────────────────────

    def events_since(self, session_id: str, from_seq: int = 0) -> list[AgentEvent]:
        live = self._live(session_id)
        with self._events:
            return [e for e in live.events if e.seq >= from_seq]

    def wait_events(
        self, session_id: str, from_seq: int, timeout: float = 0.2
    ) -> list[AgentEvent]:
        """Events at or after from_seq, blocking up to timeout for new ones."""
        live = self._live(session_id)
        with self._events:
            fresh = [e for e in live.events if e.seq >= from_seq]
            if fresh:
                return fresh
            self._events.wait(timeout)
            return [e for e in live.events if e.seq >= from_seq]

    def is_busy(self, session_id: str) -> bool:
        return self._live(session_id).busy

    def is_quiescent(self, session_id: str) -> bool:
        """True when the session is between turns: no worker running and the
        status is stable. A follow-mode stream closes at this boundary."""
        live = self._live(session_id)
        return not live.busy and live.session.status in (
            SessionStatus.IDLE,
            SessionStatus.AWAITING_CONFIRMATION,
            SessionStatus.CLOSED,
        )
