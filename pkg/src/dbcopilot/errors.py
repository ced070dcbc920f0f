"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CopilotError(Exception):
    """Base class for all package errors."""


# ── session ────────────────────────────────────────────────────────────────


class SessionClosed(CopilotError):
    """Turn appended to a closed session."""


class IndexMismatch(CopilotError):
    """Turn index does not match the append position."""


class EmptySession(CopilotError):
    """Operation requires at least one user message."""


class InvalidSessionState(CopilotError):
    """Session is not in the status the operation requires."""


# ── SQL analysis ───────────────────────────────────────────────────────────


class ParseError(CopilotError):
    """Statement could not be understood."""


class MultiStatementError(ParseError):
    """More than one statement in a single input."""


# ── database adapter ───────────────────────────────────────────────────────


class DatabaseConnectionError(CopilotError):
    """Database could not be opened or reached."""


class UnknownDatabase(CopilotError):
    """db_ref does not name a configured database."""


class NoSuchTable(CopilotError):
    def __init__(self, table: str) -> None:
        super().__init__(f"no such table: {table}")
        self.table = table


class DbError(CopilotError):
    """Engine-level execution error. The message is the engine's own text,
    surfaced verbatim because the auto-debug loop reasons over it."""


class QueryTimeout(DbError):
    """Statement exceeded its time budget."""


class PreconditionViolation(CopilotError):
    """State-modifying SQL passed to a read-only execution path."""


# ── schema index / prompting ───────────────────────────────────────────────


class EmbeddingError(CopilotError):
    """Embedding provider failed to produce a vector."""


class PromptOverflow(CopilotError):
    """Prompt exceeds its budget even after maximal history trimming."""


# ── llm backend ────────────────────────────────────────────────────────────


class ProviderError(CopilotError):
    """Transport or quota failure from the model provider."""


class ScriptMismatch(ProviderError):
    """Scripted matcher rejected the request: the trajectory diverged."""


class ScriptExhausted(ProviderError):
    """Scripted backend ran out of canned responses."""


# ── tool registry ──────────────────────────────────────────────────────────


class UnknownTool(CopilotError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown tool: {name}")
        self.name = name


class ArgumentValidationError(CopilotError):
    """Tool call arguments do not match the declared parameter schema."""


class AuthorizationMissing(CopilotError):
    """State-modifying or high-risk call without a valid authorization token."""


# ── safety protocol ────────────────────────────────────────────────────────


class PlanCancelled(CopilotError):
    """User replied with something other than an approval. Carries the reply
    so the agent can reason over it."""

    def __init__(self, reply: str) -> None:
        super().__init__(f"plan cancelled by reply: {reply!r}")
        self.reply = reply


class NoPendingPlan(CopilotError):
    """Confirmation reply arrived with no plan awaiting confirmation."""


# ── eval harness ───────────────────────────────────────────────────────────


class SuiteConfigError(CopilotError):
    """Evaluation suite cannot run as configured."""


class FormatError(CopilotError):
    """Task file is not valid Spider-format JSON."""


class MissingDatabase(SuiteConfigError):
    def __init__(self, db_ids: list[str]) -> None:
        super().__init__(f"missing databases: {', '.join(sorted(db_ids))}")
        self.db_ids = list(db_ids)


# ── service / cli ──────────────────────────────────────────────────────────


class NoSuchSession(CopilotError):
    def __init__(self, session_id: str) -> None:
        super().__init__(f"no such session: {session_id}")
        self.session_id = session_id


class SessionBusy(CopilotError):
    """Session is already processing a message."""


class ConfigError(CopilotError):
    """Configuration file is invalid; message names the offending key."""
