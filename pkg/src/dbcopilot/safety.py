"""Multi-layered safety protocol: risk classification, the mandatory
confirmation loop with action plans, and the automated guardrail playbooks
(PII shield, star-select interception, destructive double confirmation).

Everything here is a deterministic rule over structured inputs; an optional
model judge can only ever add PII flags, never remove lexicon ones.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import NoPendingPlan, PlanCancelled, ProviderError
from .llm import Backend, ModelRequest
from .schemaindex import SchemaContext
from .session import STANDARD_APPROVALS, normalize_reply
from .sqlanalyzer import StatementProfile

logger = logging.getLogger(__name__)

# Tables at or above this row count are "potentially large" when stats are
# available; without stats the reason is omitted, never guessed.
LARGE_TABLE_ROW_THRESHOLD = 100_000

DEFAULT_PII_PATTERNS = (
    "ssn",
    "social_security",
    "email",
    "phone",
    "maiden",
    "bio",
    "passport",
    "salary",
    "password",
    "birth",
    "dob",
    "address",
    "credit_card",
    "iban",
    "national_id",
)

# Imperative admin verbs that, without a concrete fully-parameterized
# statement, make a request ambiguous and high-risk.
ADMIN_REQUEST_VERBS = frozenset(
    {
        "clean", "cleanup", "purge", "optimize", "optimise", "archive",
        "reset", "compact", "prune", "wipe", "vacuum", "reindex", "tidy",
        "clear", "rotate", "trim",
    }
)


class RiskLevel(str, Enum):
    LOW = "low"
    HIGH = "high"


class RiskReason(str, Enum):
    STATE_MODIFYING = "state_modifying"
    DESTRUCTIVE = "destructive"
    LARGE_TABLE = "large_table"
    SENSITIVE_COLUMNS = "sensitive_columns"
    AMBIGUOUS_ADMIN_REQUEST = "ambiguous_admin_request"
    STAR_PROJECTION = "star_projection"


# star_projection triggers its own interception playbook instead of the
# confirmation loop, so it is not in the high-risk set.
HIGH_RISK_REASONS = frozenset(
    {
        RiskReason.STATE_MODIFYING,
        RiskReason.DESTRUCTIVE,
        RiskReason.LARGE_TABLE,
        RiskReason.SENSITIVE_COLUMNS,
        RiskReason.AMBIGUOUS_ADMIN_REQUEST,
    }
)


@dataclass
class RiskAssessment:
    level: RiskLevel
    reasons: list[RiskReason] = field(default_factory=list)
    triggering_statement: str | None = None

    def to_dict(self) -> dict:
        return {
            "level": self.level.value,
            "reasons": [r.value for r in self.reasons],
            "triggering_statement": self.triggering_statement,
        }


@dataclass
class PiiLexicon:
    patterns: tuple[str, ...] = DEFAULT_PII_PATTERNS

    def __post_init__(self) -> None:
        if not self.patterns:
            raise ValueError("PII lexicon must not be empty")

    def matches(self, column_name: str) -> bool:
        lowered = column_name.lower()
        tokens = set(re.split(r"[^a-z0-9]+", lowered))
        for pattern in self.patterns:
            p = pattern.lower()
            if "_" in p:
                if p in lowered:
                    return True
            elif p in tokens:
                return True
        return False


@dataclass
class PlanStep:
    description: str
    statement: str | None = None

    def to_dict(self) -> dict:
        return {"description": self.description, "statement": self.statement}


@dataclass
class ActionPlan:
    """User-facing multi-step plan awaiting explicit confirmation. Destructive
    plans need two distinct approvals before they become executable."""

    id: str
    steps: list[PlanStep]
    warnings: list[str] = field(default_factory=list)
    confirmations_required: int = 1
    confirmations_received: int = 0
    cancelled: bool = False

    @property
    def executable(self) -> bool:
        return (
            not self.cancelled
            and self.confirmations_received >= self.confirmations_required
        )

    def statements(self) -> list[str]:
        return [s.statement for s in self.steps if s.statement]

    def to_dict(self) -> dict:
        return {
            "plan_id": self.id,
            "steps": [s.to_dict() for s in self.steps],
            "warnings": list(self.warnings),
            "confirmations_required": self.confirmations_required,
            "confirmations_received": self.confirmations_received,
        }


@dataclass
class InterceptionMessage:
    table: str
    columns: list[str]
    text: str


def _utterance_requests_admin_action(utterance: str) -> bool:
    words = set(re.findall(r"[a-z]+", utterance.lower()))
    return bool(words & ADMIN_REQUEST_VERBS)


def detect_pii_columns(
    schema: SchemaContext,
    lexicon: PiiLexicon | None = None,
    judge: Backend | None = None,
) -> list[tuple[str, str]]:
    """Flag (table, column) pairs that look personally identifiable.

    Lexicon matches are always included. A configured judge can add flags on
    top; if it fails the result degrades to lexicon-only with a logged
    warning, because the shield must not disappear when the model does.
    """
    lexicon = lexicon or PiiLexicon()
    flagged: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for table in schema.tables:
        for col in table.columns:
            if lexicon.matches(col.name):
                key = (table.name, col.name)
                if key not in seen:
                    seen.add(key)
                    flagged.append(key)
    if judge is not None:
        try:
            flagged_by_judge = _judge_pii(schema, judge)
        except ProviderError as exc:
            logger.warning("PII judge unavailable, using lexicon only: %s", exc)
            flagged_by_judge = []
        for key in flagged_by_judge:
            if key not in seen:
                seen.add(key)
                flagged.append(key)
    return flagged


def _judge_pii(schema: SchemaContext, judge: Backend) -> list[tuple[str, str]]:
    listing = "\n".join(
        f"{table.name}.{col.name}"
        for table in schema.tables
        for col in table.columns
    )
    request = ModelRequest(
        prompt_sections=[
            (
                "System",
                "You review database columns for personally identifiable "
                "information. Reply with one table.column per line for every "
                "column that may hold PII; reply NONE if there are none.",
            ),
            ("Columns", listing),
        ]
    )
    response = judge.complete(request)
    if response.kind != "text" or not response.text:
        return []
    known = {
        (table.name.lower(), col.name.lower()): (table.name, col.name)
        for table in schema.tables
        for col in table.columns
    }
    out = []
    for match in re.finditer(r"([\w]+)\.([\w]+)", response.text):
        key = (match.group(1).lower(), match.group(2).lower())
        if key in known:
            out.append(known[key])
    return out


def _statement_mentions_pii(
    profile: StatementProfile, sql: str | None, pii_columns: Iterable[tuple[str, str]]
) -> bool:
    pii_by_table: dict[str, set[str]] = {}
    all_pii_cols: set[str] = set()
    for table, col in pii_columns:
        pii_by_table.setdefault(table.lower(), set()).add(col.lower())
        all_pii_cols.add(col.lower())
    if not all_pii_cols:
        return False
    referenced = {t.lower() for t in profile.referenced_tables}
    if profile.has_star_projection and referenced & set(pii_by_table):
        return True
    if sql:
        tokens = set(re.findall(r"[a-z_][a-z0-9_]*", sql.lower()))
        if tokens & all_pii_cols:
            return True
    return False


def assess_risk(
    utterance: str,
    profiles: Sequence[tuple[StatementProfile, str] | StatementProfile],
    schema: SchemaContext,
    stats: dict[str, int] | None = None,
    lexicon: PiiLexicon | None = None,
    pii_columns: list[tuple[str, str]] | None = None,
) -> RiskAssessment:
    """Deterministic rule-based classification of one request. Profiles may
    be bare StatementProfiles or (profile, sql-text) pairs; the text improves
    sensitive-column detection."""
    normalized: list[tuple[StatementProfile, str | None]] = []
    for item in profiles:
        if isinstance(item, StatementProfile):
            normalized.append((item, None))
        else:
            normalized.append((item[0], item[1]))

    if pii_columns is None:
        pii_columns = detect_pii_columns(schema, lexicon) if schema.tables else []

    reasons: list[RiskReason] = []
    triggering: str | None = None

    def add(reason: RiskReason, statement: str | None = None) -> None:
        nonlocal triggering
        if reason not in reasons:
            reasons.append(reason)
        if triggering is None and statement is not None:
            triggering = statement

    for profile, sql in normalized:
        if profile.is_state_modifying:
            add(RiskReason.STATE_MODIFYING, sql)
        if profile.is_destructive:
            add(RiskReason.DESTRUCTIVE, sql)
        if stats:
            lowered_stats = {t.lower(): n for t, n in stats.items()}
            for table in profile.referenced_tables:
                if lowered_stats.get(table.lower(), 0) >= LARGE_TABLE_ROW_THRESHOLD:
                    add(RiskReason.LARGE_TABLE, sql)
        if _statement_mentions_pii(profile, sql, pii_columns):
            add(RiskReason.SENSITIVE_COLUMNS, sql)
        if profile.has_star_projection:
            add(RiskReason.STAR_PROJECTION, sql)

    if not normalized and _utterance_requests_admin_action(utterance):
        add(RiskReason.AMBIGUOUS_ADMIN_REQUEST)

    level = (
        RiskLevel.HIGH
        if any(r in HIGH_RISK_REASONS for r in reasons)
        else RiskLevel.LOW
    )
    return RiskAssessment(level=level, reasons=reasons, triggering_statement=triggering)


def intercept_star_select(
    profile: StatementProfile, schema: SchemaContext
) -> InterceptionMessage | None:
    """The SELECT * playbook: never execute a star projection; instead list
    the table's actual columns and ask the user to choose. Purely syntactic,
    so even one-column tables are intercepted."""
    if not profile.has_star_projection:
        return None
    table_name = profile.referenced_tables[0] if profile.referenced_tables else ""
    columns: list[str] = []
    for table in schema.tables:
        if table.name.lower() == table_name.lower():
            table_name = table.name
            columns = table.column_names()
            break
    if columns:
        column_list = ", ".join(columns)
        text = (
            f"SELECT * on {table_name} was intercepted: fetching every column "
            "can be slow and returns more data than you usually need. "
            f"Available columns are: {column_list}. "
            "Which columns should the query return?"
        )
    else:
        text = (
            "SELECT * was intercepted: fetching every column can be slow and "
            "returns more data than you usually need. Please name the exact "
            "columns the query should return."
        )
    return InterceptionMessage(table=table_name, columns=columns, text=text)


def build_action_plan(
    plan_id: str,
    statements: Sequence[tuple[str, StatementProfile]],
    assessment: RiskAssessment,
) -> ActionPlan:
    """Compose the user-facing plan for a high-risk request: one step per
    statement, warnings derived from the triggered reasons, and a second
    required confirmation when any step is destructive."""
    steps = [
        PlanStep(description=f"Execute: {sql}", statement=sql)
        for sql, _ in statements
    ]
    destructive = any(profile.is_destructive for _, profile in statements)
    warnings: list[str] = []
    if destructive:
        warnings.append(
            "This plan contains a destructive operation (DROP/TRUNCATE); "
            "the change is irreversible."
        )
    if RiskReason.STATE_MODIFYING in assessment.reasons and not destructive:
        warnings.append("This plan modifies data in the database.")
    if RiskReason.SENSITIVE_COLUMNS in assessment.reasons:
        warnings.append("This plan touches columns flagged as personally identifiable.")
    if RiskReason.LARGE_TABLE in assessment.reasons:
        warnings.append("This plan targets a potentially large table.")
    if RiskReason.AMBIGUOUS_ADMIN_REQUEST in assessment.reasons:
        warnings.append("The request was ambiguous; review the steps carefully.")
    return ActionPlan(
        id=plan_id,
        steps=steps,
        warnings=warnings,
        confirmations_required=2 if destructive else 1,
    )


def advance_confirmation(
    plan: ActionPlan,
    reply: str,
    approvals: Iterable[str] | None = None,
) -> ActionPlan:
    """Apply one user reply to a pending plan. An approval counts exactly
    once; anything else cancels the plan and raises PlanCancelled carrying
    the reply for the agent to reason over."""
    if plan.cancelled:
        raise NoPendingPlan(f"plan {plan.id} was already cancelled")
    if plan.executable:
        raise NoPendingPlan(f"plan {plan.id} is already fully confirmed")
    allowed = frozenset(approvals) if approvals is not None else STANDARD_APPROVALS
    if normalize_reply(reply) in allowed:
        plan.confirmations_received += 1
        return plan
    plan.cancelled = True
    raise PlanCancelled(reply)
