"""The agent's tool arsenal: declarations, argument validation, routing, and
the authorization gate in front of state-modifying execution.

dispatch() never propagates database errors: they become observations so the
auto-debug loop can reason over them. What it does raise are contract
violations (unknown tool, bad arguments, missing authorization) because those
are agent bugs, not things to debug conversationally.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .dbadapter import Database
from .errors import (
    ArgumentValidationError,
    AuthorizationMissing,
    DbError,
    MultiStatementError,
    ParseError,
    UnknownTool,
)
from .schemaindex import TableIndex, search_tables_by_name
from .session import (
    Actor,
    Observation,
    ObservationSource,
    Session,
    Turn,
    TurnKind,
    record,
)
from .sqlanalyzer import StatementProfile, profile_statement

TOOL_EXECUTE_QUERY = "execute_query"
TOOL_EXECUTE_NON_QUERY = "execute_non_query"
TOOL_SEARCH_TABLES = "search_tables_by_name"
TOOL_INTERNET_SEARCH = "request_for_internet_search"

ALL_TOOLS = (
    TOOL_EXECUTE_QUERY,
    TOOL_EXECUTE_NON_QUERY,
    TOOL_SEARCH_TABLES,
    TOOL_INTERNET_SEARCH,
)


@dataclass(frozen=True)
class ToolDeclaration:
    name: str
    parameters: dict[str, dict[str, Any]]  # name -> {"type": ..., "required": ...}
    description: str

    def to_json_schema(self) -> dict[str, Any]:
        """Model-facing JSON schema for function calling."""
        return {
            "type": "object",
            "properties": {
                name: {"type": spec["type"]} for name, spec in self.parameters.items()
            },
            "required": [
                name for name, spec in self.parameters.items() if spec.get("required")
            ],
        }


@dataclass
class ToolCall:
    tool: str
    arguments: dict[str, Any]


@dataclass
class ToolResult:
    tool: str
    observation: Observation
    turn_index: int


_STRING_RE = re.compile(r"'(?:[^']|'')*'|\"(?:[^\"]|\"\")*\"")


def normalize_statement(sql: str) -> str:
    """Whitespace-collapsed, keyword-uppercased statement text. Quoted
    literals and identifiers keep their exact spelling."""
    parts: list[str] = []
    pos = 0
    for m in _STRING_RE.finditer(sql):
        parts.append(sql[pos : m.start()].upper())
        parts.append(m.group())
        pos = m.end()
    parts.append(sql[pos:].upper())
    collapsed = re.sub(r"\s+", " ", "".join(parts)).strip()
    return collapsed.rstrip(";").strip()


def statement_fingerprint(sql: str) -> str:
    """Hash binding a confirmed plan to the exact statements it displayed."""
    return hashlib.sha256(normalize_statement(sql).encode("utf-8")).hexdigest()


@dataclass
class AuthorizationToken:
    """Grants execution of exactly the statements a confirmed plan displayed,
    identified by fingerprint. Single-use tokens spend each fingerprint once."""

    plan_id: str
    scope: frozenset[str]
    single_use: bool = True
    _spent: set[str] = field(default_factory=set, repr=False)

    def authorizes(self, fingerprint: str) -> bool:
        if fingerprint not in self.scope:
            return False
        if self.single_use and fingerprint in self._spent:
            return False
        return True

    def consume(self, fingerprint: str) -> None:
        if not self.authorizes(fingerprint):
            raise AuthorizationMissing(
                f"fingerprint {fingerprint[:12]}… not authorized by plan {self.plan_id}"
            )
        if self.single_use:
            self._spent.add(fingerprint)


class SearchStub:
    """Local fixture store behind request_for_internet_search. Exact query
    matches win; otherwise preloaded context (the eval protocol's external
    knowledge) is returned. A real web backend is a configuration option."""

    def __init__(self, fixtures: dict[str, list[str]] | None = None) -> None:
        self._fixtures = {k.lower(): list(v) for k, v in (fixtures or {}).items()}
        self._preloaded: list[str] = []

    def add_fixture(self, query: str, snippets: list[str]) -> None:
        self._fixtures[query.lower()] = list(snippets)

    def preload(self, snippets: list[str]) -> None:
        self._preloaded = list(snippets)

    def clear_preloaded(self) -> None:
        self._preloaded = []

    def search(self, query: str) -> list[str]:
        hit = self._fixtures.get(query.strip().lower())
        if hit is not None:
            return list(hit)
        return list(self._preloaded)


def default_declarations() -> list[ToolDeclaration]:
    return [
        ToolDeclaration(
            name=TOOL_EXECUTE_QUERY,
            parameters={"sql": {"type": "string", "required": True}},
            description="Run a single read-only SELECT statement and return rows.",
        ),
        ToolDeclaration(
            name=TOOL_EXECUTE_NON_QUERY,
            parameters={"sql": {"type": "string", "required": True}},
            description=(
                "Run a single state-modifying SQL statement. Requires a "
                "confirmed action plan; returns the affected-row count."
            ),
        ),
        ToolDeclaration(
            name=TOOL_SEARCH_TABLES,
            parameters={
                "query": {"type": "string", "required": True},
                "k": {"type": "integer", "required": False},
            },
            description="Rank database tables by semantic similarity to a phrase.",
        ),
        ToolDeclaration(
            name=TOOL_INTERNET_SEARCH,
            parameters={"query": {"type": "string", "required": True}},
            description="Look up external knowledge needed to answer the request.",
        ),
    ]


_TYPE_CHECKS: dict[str, tuple[type, ...]] = {
    "string": (str,),
    "integer": (int,),
    "number": (int, float),
    "boolean": (bool,),
}


class ToolRegistry:
    """Immutable routing table over the four agent tools. One registry can
    serve many sessions; all state lives in the session and the database."""

    def __init__(
        self,
        database: Database,
        index: TableIndex,
        search: SearchStub | None = None,
        row_limit: int | None = None,
        audit_hook: Callable[[str, str, AuthorizationToken | None], None] | None = None,
    ) -> None:
        self.database = database
        self.index = index
        self.search = search or SearchStub()
        self.row_limit = row_limit
        self.audit_hook = audit_hook
        self._declarations = {d.name: d for d in default_declarations()}

    def declarations(self) -> list[ToolDeclaration]:
        return list(self._declarations.values())

    def validate_arguments(self, call: ToolCall) -> ToolDeclaration:
        decl = self._declarations.get(call.tool)
        if decl is None:
            raise UnknownTool(call.tool)
        for name, spec in decl.parameters.items():
            if spec.get("required") and name not in call.arguments:
                raise ArgumentValidationError(
                    f"{call.tool}: missing required argument {name!r}"
                )
        for name, value in call.arguments.items():
            spec = decl.parameters.get(name)
            if spec is None:
                raise ArgumentValidationError(
                    f"{call.tool}: unexpected argument {name!r}"
                )
            expected = _TYPE_CHECKS.get(spec["type"], (object,))
            if not isinstance(value, expected) or (
                spec["type"] == "integer" and isinstance(value, bool)
            ):
                raise ArgumentValidationError(
                    f"{call.tool}: argument {name!r} must be {spec['type']}"
                )
        return decl

    def dispatch(
        self,
        call: ToolCall,
        session: Session,
        token: AuthorizationToken | None = None,
    ) -> ToolResult:
        """Execute one validated tool call and append its tool_result turn.
        The calling engine appends the tool_call turn before dispatching."""
        self.validate_arguments(call)
        call_turn = _last_tool_call_index(session)

        if call.tool == TOOL_EXECUTE_QUERY:
            observation = self._execute_query(call.arguments["sql"], token)
        elif call.tool == TOOL_EXECUTE_NON_QUERY:
            observation = self._execute_non_query(call.arguments["sql"], token)
        elif call.tool == TOOL_SEARCH_TABLES:
            k = call.arguments.get("k", 5)
            candidates = search_tables_by_name(self.index, call.arguments["query"], k=k)
            observation = Observation(
                source=ObservationSource.TOOL_OUTPUT,
                content=[{"table": c.table, "score": c.score} for c in candidates],
            )
        else:  # TOOL_INTERNET_SEARCH
            snippets = self.search.search(call.arguments["query"])
            observation = Observation(
                source=ObservationSource.TOOL_OUTPUT, content=snippets
            )

        turn = record(
            session,
            Actor.TOOL,
            TurnKind.TOOL_RESULT,
            {
                "tool": call.tool,
                "observation": observation.to_dict(),
                "call_turn": call_turn,
            },
        )
        return ToolResult(tool=call.tool, observation=observation, turn_index=turn.index)

    # ── tool bodies ────────────────────────────────────────────────────

    def _profile_or_error(self, sql: str) -> StatementProfile | Observation:
        try:
            return profile_statement(sql)
        except (ParseError, MultiStatementError) as exc:
            return Observation(source=ObservationSource.DB_ERROR, content=str(exc))

    def _execute_query(
        self, sql: str, token: AuthorizationToken | None
    ) -> Observation:
        profiled = self._profile_or_error(sql)
        if isinstance(profiled, Observation):
            return profiled
        if profiled.is_state_modifying:
            # Wrong tool for the statement; hard gate, not an observation.
            self._require_token(sql, token)
        try:
            rowset = self.database.run_select(sql, row_limit=self.row_limit)
        except DbError as exc:
            return Observation(source=ObservationSource.DB_ERROR, content=str(exc))
        return Observation(
            source=ObservationSource.QUERY_RESULT,
            content=rowset.to_dict(),
            truncated=rowset.truncated,
        )

    def _execute_non_query(
        self, sql: str, token: AuthorizationToken | None
    ) -> Observation:
        self._require_token(sql, token)
        try:
            affected = self.database.run_non_query(sql)
        except DbError as exc:
            return Observation(source=ObservationSource.DB_ERROR, content=str(exc))
        return Observation(
            source=ObservationSource.TOOL_OUTPUT, content={"affected_rows": affected}
        )

    def _require_token(self, sql: str, token: AuthorizationToken | None) -> None:
        fingerprint = statement_fingerprint(sql)
        if self.audit_hook is not None:
            self.audit_hook(sql, fingerprint, token)
        if token is None:
            raise AuthorizationMissing(
                "state-modifying statement requires a confirmed plan"
            )
        token.consume(fingerprint)


def _last_tool_call_index(session: Session) -> int | None:
    for turn in reversed(session.turns):
        if turn.kind is TurnKind.TOOL_CALL:
            return turn.index
    return None
