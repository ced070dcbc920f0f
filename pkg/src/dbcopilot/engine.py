"""The reason-act-observe cycle that drives every interaction.

One engine instance owns one session at a time: it asks the model what to do,
gates risky actions behind the safety protocol, dispatches approved tool
calls, feeds observations (including verbatim database errors) back into the
next reasoning step, and stops on a final answer, a pending confirmation, or
cycle-budget exhaustion. The iterative SQL repair loop is the same cycle with
a retry counter: a failed statement's error text re-enters the prompt and the
model gets up to max_debug_retries corrected attempts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .dbadapter import Database
from .errors import (
    InvalidSessionState,
    MultiStatementError,
    NoPendingPlan,
    ParseError,
    PlanCancelled,
    ProviderError,
)
from .llm import Backend, ModelRequest
from .safety import (
    ActionPlan,
    PiiLexicon,
    RiskLevel,
    advance_confirmation,
    assess_risk,
    build_action_plan,
    intercept_star_select,
)
from .schemaindex import (
    SchemaContext,
    TableCandidate,
    TableIndex,
    assemble_sections,
    build_schema_context,
    search_tables_by_name,
)
from .session import (
    Actor,
    ObservationSource,
    Session,
    SessionStatus,
    TurnCountingPolicy,
    TurnKind,
    record,
)
from .sqlanalyzer import (
    StatementProfile,
    extract_entity_mentions,
    profile_statement,
)
from .tools import (
    TOOL_EXECUTE_NON_QUERY,
    TOOL_EXECUTE_QUERY,
    AuthorizationToken,
    ToolCall,
    ToolRegistry,
    statement_fingerprint,
)

SQL_TOOLS = frozenset({TOOL_EXECUTE_QUERY, TOOL_EXECUTE_NON_QUERY})

DEFAULT_SYSTEM_RULES = """\
You are a careful database copilot. Work in small steps: reason about what
to do, call one tool, observe the result, and repeat until you can answer.
Rules:
- Use execute_query for SELECT statements and execute_non_query for
  state-modifying SQL. Never combine multiple statements in one call.
- Ground every query in the schema context; use search_tables_by_name when
  table references are ambiguous.
- If a statement fails, read the database error and correct the statement.
- State-modifying or sensitive operations require user confirmation; propose
  them and wait.
- Prefer precise column lists over SELECT *."""

AMBIGUOUS_REQUEST_CAUTION = (
    "Caution: this request looks like an administrative action without "
    "specific parameters. Do not execute anything yet; ask the user for the "
    "missing specifics."
)


@dataclass
class EngineConfig:
    max_cycles: int = 10
    max_debug_retries: int = 3
    prompt_budget: int = 8000
    turn_counting_policy: TurnCountingPolicy = TurnCountingPolicy.SQL_EXECUTION_ATTEMPTS
    max_observation_rows: int = 1000
    temperature: float = 0.0
    search_k: int = 5

    def __post_init__(self) -> None:
        if self.max_cycles <= 0 or self.max_debug_retries <= 0:
            raise ValueError("cycle budgets must be positive")
        if self.max_debug_retries > self.max_cycles:
            raise ValueError("max_debug_retries must not exceed max_cycles")


@dataclass
class CycleOutcome:
    kind: str  # continue | need_confirmation | final_answer | budget_exhausted
    payload: dict[str, Any] = field(default_factory=dict)


@dataclass
class AgentRuntime:
    """Everything a session needs to run: model backend, tool registry, the
    open database, the table index, and policy knobs. Immutable pieces
    (index, registry) are shared across sessions; the engine is not."""

    backend: Backend
    registry: ToolRegistry
    database: Database
    index: TableIndex
    config: EngineConfig = field(default_factory=EngineConfig)
    lexicon: PiiLexicon = field(default_factory=PiiLexicon)
    approvals: frozenset[str] | None = None
    stats: dict[str, int] | None = None
    system_rules: str = DEFAULT_SYSTEM_RULES


def make_runtime(
    database: Database,
    backend: Backend,
    config: EngineConfig | None = None,
    provider=None,
    **kwargs: Any,
) -> AgentRuntime:
    """Wire a runtime for one database: index over its table names plus a
    registry bound to it."""
    from .schemaindex import HashedTrigramProvider, build_index
    from .tools import SearchStub

    config = config or EngineConfig()
    provider = provider or HashedTrigramProvider()
    index = build_index(database.list_tables(), provider)
    registry = ToolRegistry(
        database,
        index,
        search=kwargs.pop("search", None) or SearchStub(),
        row_limit=config.max_observation_rows,
        audit_hook=kwargs.pop("audit_hook", None),
    )
    return AgentRuntime(
        backend=backend,
        registry=registry,
        database=database,
        index=index,
        config=config,
        **kwargs,
    )


class ReactEngine:
    def __init__(self, runtime: AgentRuntime) -> None:
        self.runtime = runtime
        self._pending: dict[str, tuple[ActionPlan, list[tuple[str, StatementProfile]]]] = {}

    # ── public operations ──────────────────────────────────────────────

    def run_turn(self, session: Session, user_message: str) -> Session:
        """Drive one user request to a final answer, a pending confirmation,
        or budget exhaustion. Every step is recorded as a turn."""
        if session.status is not SessionStatus.IDLE:
            raise InvalidSessionState(
                f"run_turn requires an idle session, status is {session.status.value}"
            )
        record(session, Actor.USER, TurnKind.USER_MESSAGE, {"text": user_message})
        session.status = SessionStatus.REASONING
        context = self.build_context(user_message)
        self._cycles(session, user_message, context)
        return session

    def auto_debug(
        self, session: Session, failed_sql: str, db_error: str
    ) -> CycleOutcome:
        """Resume reasoning from a recorded database error: the error text
        re-enters the prompt and the model gets up to max_debug_retries
        corrected statements before the engine reports failure."""
        if not any(
            t.kind is TurnKind.TOOL_RESULT
            and t.payload.get("observation", {}).get("source")
            == ObservationSource.DB_ERROR.value
            for t in session.turns
        ):
            raise InvalidSessionState("auto_debug requires a recorded db_error observation")
        user_message = self._last_user_message(session)
        session.status = SessionStatus.REASONING
        context = self.build_context(user_message)
        return self._cycles(
            session, user_message, context, debug_attempts=1, last_error=db_error
        )

    def resume_with_confirmation(self, session: Session, reply: str) -> Session:
        """Apply a user reply to the pending plan: approvals advance it (and
        execute it once fully confirmed, under a token scoped to exactly the
        confirmed statements); anything else cancels it and the reply goes
        back into reasoning."""
        if session.status is not SessionStatus.AWAITING_CONFIRMATION:
            raise NoPendingPlan(
                f"session {session.id} is not awaiting confirmation"
            )
        pending = self._pending.get(session.id)
        if pending is None:
            raise NoPendingPlan(f"session {session.id} has no pending plan")
        plan, statements = pending
        user_message = self._last_user_message(session)
        context = self.build_context(user_message)

        try:
            advance_confirmation(plan, reply, self.runtime.approvals)
        except PlanCancelled:
            record(
                session,
                Actor.USER,
                TurnKind.CONFIRMATION_REPLY,
                {"text": reply, "plan_id": plan.id, "approved": False, "cancelled": True},
            )
            del self._pending[session.id]
            session.status = SessionStatus.REASONING
            self._cycles(session, user_message, context)
            return session

        record(
            session,
            Actor.USER,
            TurnKind.CONFIRMATION_REPLY,
            {
                "text": reply,
                "plan_id": plan.id,
                "approved": True,
                "sequence": plan.confirmations_received,
            },
        )
        if not plan.executable:
            record(
                session,
                Actor.AGENT,
                TurnKind.CONFIRMATION_REQUEST,
                {
                    "plan_id": plan.id,
                    "text": (
                        "This operation is irreversible. Please confirm a "
                        "second time to proceed."
                    ),
                    "sequence": plan.confirmations_received + 1,
                },
            )
            return session

        del self._pending[session.id]
        token = AuthorizationToken(
            plan_id=plan.id,
            scope=frozenset(statement_fingerprint(sql) for sql, _ in statements),
        )
        session.status = SessionStatus.EXECUTING
        executed: list[dict[str, Any]] = []
        for sql, profile in statements:
            tool = (
                TOOL_EXECUTE_NON_QUERY
                if profile.is_state_modifying
                else TOOL_EXECUTE_QUERY
            )
            call = ToolCall(tool=tool, arguments={"sql": sql})
            record(
                session,
                Actor.AGENT,
                TurnKind.TOOL_CALL,
                {
                    "tool": tool,
                    "arguments": call.arguments,
                    "plan_id": plan.id,
                    "fingerprint": statement_fingerprint(sql),
                },
            )
            result = self.runtime.registry.dispatch(call, session, token=token)
            executed.append({"sql": sql, "observation": result.observation.to_dict()})
        session.status = SessionStatus.REASONING
        self._cycles(session, user_message, context, plan_results=executed)
        return session

    def pending_plan(self, session: Session) -> ActionPlan | None:
        pending = self._pending.get(session.id)
        return pending[0] if pending else None

    # ── internals ──────────────────────────────────────────────────────

    def build_context(self, user_message: str) -> SchemaContext:
        """Initial grounding: entity mentions seed index searches and the
        top-ranked tables' schemas are rendered within half the prompt
        budget, leaving room for history."""
        cfg = self.runtime.config
        best: dict[str, float] = {}
        for query in [user_message, *extract_entity_mentions(user_message)]:
            for cand in search_tables_by_name(self.runtime.index, query, k=cfg.search_k):
                if cand.score > best.get(cand.table, float("-inf")):
                    best[cand.table] = cand.score
        ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[: cfg.search_k]
        candidates = [TableCandidate(table=t, score=s) for t, s in ranked]
        return build_schema_context(
            self.runtime.database, candidates, budget=cfg.prompt_budget // 2
        )

    def _last_user_message(self, session: Session) -> str:
        for turn in reversed(session.turns):
            if turn.kind is TurnKind.USER_MESSAGE:
                return str(turn.payload.get("text", ""))
        return ""

    def _system_rules(self, user_message: str) -> str:
        rules = self.runtime.system_rules
        assessment = assess_risk(
            user_message, [], SchemaContext(), lexicon=self.runtime.lexicon
        )
        if assessment.level is RiskLevel.HIGH:
            rules = f"{rules}\n\n{AMBIGUOUS_REQUEST_CAUTION}"
        return rules

    def _build_request(
        self, session: Session, user_message: str, context: SchemaContext
    ) -> ModelRequest:
        sections = assemble_sections(
            user_query=user_message,
            history=session.turns,
            context=context,
            system_rules=self._system_rules(user_message),
            budget=self.runtime.config.prompt_budget,
        )
        return ModelRequest(
            prompt_sections=sections,
            tool_declarations=self.runtime.registry.declarations(),
            temperature=self.runtime.config.temperature,
        )

    def _next_plan_id(self, session: Session) -> str:
        n = sum(1 for t in session.turns if t.kind is TurnKind.PLAN_PROPOSAL)
        return f"plan-{n + 1}"

    def _cycles(
        self,
        session: Session,
        user_message: str,
        context: SchemaContext,
        debug_attempts: int = 0,
        last_error: str | None = None,
        plan_results: list[dict[str, Any]] | None = None,
    ) -> CycleOutcome:
        cfg = self.runtime.config
        last_success: dict[str, Any] | None = None

        for _ in range(cfg.max_cycles):
            request = self._build_request(session, user_message, context)
            try:
                response = self.runtime.backend.complete(request)
            except ProviderError as exc:
                record(session, Actor.SYSTEM, TurnKind.ERROR, {"text": str(exc)})
                session.status = SessionStatus.IDLE
                raise

            if response.rationale:
                record(
                    session, Actor.AGENT, TurnKind.REASONING, {"text": response.rationale}
                )

            if response.kind == "text":
                return self._finish(
                    session, str(response.text), last_success, plan_results
                )

            call = ToolCall(
                tool=response.tool_call.tool,
                arguments=dict(response.tool_call.arguments),
            )

            if call.tool in SQL_TOOLS:
                outcome, debug_attempts, last_error, last_success = self._sql_step(
                    session, user_message, context, call,
                    debug_attempts, last_error, last_success, plan_results,
                )
                if outcome is not None:
                    return outcome
            else:
                record(
                    session,
                    Actor.AGENT,
                    TurnKind.TOOL_CALL,
                    {"tool": call.tool, "arguments": call.arguments},
                )
                self.runtime.registry.dispatch(call, session)

        payload: dict[str, Any] = {
            "text": self._exhaustion_text(last_success, last_error),
            "exhausted": True,
        }
        if last_success:
            payload.update(last_success)
        record(session, Actor.AGENT, TurnKind.FINAL_ANSWER, payload)
        session.status = SessionStatus.IDLE
        return CycleOutcome(kind="budget_exhausted", payload=payload)

    def _sql_step(
        self,
        session: Session,
        user_message: str,
        context: SchemaContext,
        call: ToolCall,
        debug_attempts: int,
        last_error: str | None,
        last_success: dict[str, Any] | None,
        plan_results: list[dict[str, Any]] | None,
    ) -> tuple[CycleOutcome | None, int, str | None, dict[str, Any] | None]:
        sql = str(call.arguments.get("sql", ""))
        try:
            profile = profile_statement(sql)
        except (ParseError, MultiStatementError) as exc:
            self._record_failed_call(session, call, str(exc))
            debug_attempts += 1
            if debug_attempts > self.runtime.config.max_debug_retries:
                return (
                    self._give_up(session, str(exc), plan_results),
                    debug_attempts, str(exc), last_success,
                )
            return None, debug_attempts, str(exc), last_success

        interception = intercept_star_select(profile, context)
        if interception is not None:
            payload = {
                "text": interception.text,
                "interception": {
                    "table": interception.table,
                    "columns": interception.columns,
                    "requested_sql": sql,
                },
            }
            record(session, Actor.AGENT, TurnKind.FINAL_ANSWER, payload)
            session.status = SessionStatus.IDLE
            return CycleOutcome(kind="final_answer", payload=payload), debug_attempts, last_error, last_success

        assessment = assess_risk(
            user_message,
            [(profile, sql)],
            context,
            stats=self.runtime.stats,
            lexicon=self.runtime.lexicon,
        )
        if assessment.level is RiskLevel.HIGH:
            plan = build_action_plan(
                self._next_plan_id(session), [(sql, profile)], assessment
            )
            self._pending[session.id] = (plan, [(sql, profile)])
            record(
                session,
                Actor.AGENT,
                TurnKind.PLAN_PROPOSAL,
                {**plan.to_dict(), "assessment": assessment.to_dict()},
            )
            warning_text = (" ".join(plan.warnings) + " ") if plan.warnings else ""
            record(
                session,
                Actor.AGENT,
                TurnKind.CONFIRMATION_REQUEST,
                {
                    "plan_id": plan.id,
                    "text": (
                        f"{warning_text}Reply 'yes' or 'proceed' to run the plan, "
                        "or anything else to cancel."
                    ),
                    "sequence": 1,
                },
            )
            session.status = SessionStatus.AWAITING_CONFIRMATION
            outcome = CycleOutcome(
                kind="need_confirmation", payload={"plan_id": plan.id}
            )
            return outcome, debug_attempts, last_error, last_success

        record(
            session,
            Actor.AGENT,
            TurnKind.TOOL_CALL,
            {
                "tool": call.tool,
                "arguments": call.arguments,
                "fingerprint": statement_fingerprint(sql),
                "assessment": assessment.to_dict(),
            },
        )
        result = self.runtime.registry.dispatch(call, session)
        observation = result.observation

        if observation.source is ObservationSource.DB_ERROR:
            debug_attempts += 1
            error_text = str(observation.content)
            if debug_attempts > self.runtime.config.max_debug_retries:
                return (
                    self._give_up(session, error_text, plan_results),
                    debug_attempts, error_text, last_success,
                )
            return None, debug_attempts, error_text, last_success

        if observation.source is ObservationSource.QUERY_RESULT:
            last_success = {"sql": sql, "result": observation.content}
        return None, 0, last_error, last_success

    def _record_failed_call(self, session: Session, call: ToolCall, error: str) -> None:
        record(
            session,
            Actor.AGENT,
            TurnKind.TOOL_CALL,
            {"tool": call.tool, "arguments": call.arguments},
        )
        record(
            session,
            Actor.TOOL,
            TurnKind.TOOL_RESULT,
            {
                "tool": call.tool,
                "observation": {
                    "source": ObservationSource.DB_ERROR.value,
                    "content": error,
                    "truncated": False,
                },
                "call_turn": session.next_index - 1,
            },
        )

    def _finish(
        self,
        session: Session,
        text: str,
        last_success: dict[str, Any] | None,
        plan_results: list[dict[str, Any]] | None,
    ) -> CycleOutcome:
        payload: dict[str, Any] = {"text": text}
        if last_success:
            payload.update(last_success)
        if plan_results:
            payload["executed_steps"] = plan_results
        record(session, Actor.AGENT, TurnKind.FINAL_ANSWER, payload)
        session.status = SessionStatus.IDLE
        return CycleOutcome(kind="final_answer", payload=payload)

    def _give_up(
        self,
        session: Session,
        last_error: str,
        plan_results: list[dict[str, Any]] | None,
    ) -> CycleOutcome:
        payload: dict[str, Any] = {
            "text": (
                "I could not produce a working statement within the repair "
                f"budget. The last database error was: {last_error}"
            ),
            "failure": True,
            "error": last_error,
        }
        if plan_results:
            payload["executed_steps"] = plan_results
        record(session, Actor.AGENT, TurnKind.FINAL_ANSWER, payload)
        session.status = SessionStatus.IDLE
        return CycleOutcome(kind="final_answer", payload=payload)

    def _exhaustion_text(
        self, last_success: dict[str, Any] | None, last_error: str | None
    ) -> str:
        parts = [
            "I ran out of reasoning cycles before reaching a final answer."
        ]
        if last_success:
            parts.append(
                f"The last successful query was: {last_success['sql']}"
            )
        if last_error:
            parts.append(f"The last database error was: {last_error}")
        return " ".join(parts)
