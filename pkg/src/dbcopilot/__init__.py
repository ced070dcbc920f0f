"""Conversational SQL copilot: grounded query generation, guarded execution,
and a benchmark harness."""

from .dbadapter import ColumnSpec, ConstraintSpec, Database, RowSet, TableSchema
from .engine import AgentRuntime, CycleOutcome, EngineConfig, ReactEngine, make_runtime
from .llm import ModelRequest, ModelResponse, ScriptedBackend
from .safety import ActionPlan, PiiLexicon, RiskAssessment, RiskLevel, RiskReason
from .schemaindex import (
    HashedTrigramProvider,
    SchemaContext,
    TableCandidate,
    build_index,
    search_tables_by_name,
)
from .session import (
    Observation,
    Session,
    SessionStatus,
    Turn,
    TurnCountingPolicy,
    TurnKind,
)
from .sqlanalyzer import StatementProfile, extract_entity_mentions, profile_statement
from .tools import AuthorizationToken, ToolCall, ToolRegistry, statement_fingerprint

__version__ = "0.1.0"

__all__ = [
    "ActionPlan",
    "AgentRuntime",
    "AuthorizationToken",
    "ColumnSpec",
    "ConstraintSpec",
    "CycleOutcome",
    "Database",
    "EngineConfig",
    "HashedTrigramProvider",
    "ModelRequest",
    "ModelResponse",
    "Observation",
    "PiiLexicon",
    "ReactEngine",
    "RiskAssessment",
    "RiskLevel",
    "RiskReason",
    "RowSet",
    "SchemaContext",
    "ScriptedBackend",
    "Session",
    "SessionStatus",
    "StatementProfile",
    "TableCandidate",
    "TableSchema",
    "ToolCall",
    "ToolRegistry",
    "Turn",
    "TurnCountingPolicy",
    "TurnKind",
    "__version__",
    "build_index",
    "extract_entity_mentions",
    "make_runtime",
    "profile_statement",
    "search_tables_by_name",
    "statement_fingerprint",
]
