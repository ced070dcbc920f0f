"""Dynamic schema grounding: table-name vector index, scoped schema context,
and prompt assembly.

The index holds one unit-normalized vector per table name; queries rank
candidates by cosine similarity with lexicographic tie-breaks, so results are
independent of insertion order. Retrieved schemas render to a frozen markdown
grammar (one table per block, columns Name | Type | Nullable | Constraint)
that golden-trajectory tests assert on; parse_schema_context() recovers the
structure from the rendered text.
"""

from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .dbadapter import ColumnSpec, ConstraintSpec, Database, TableSchema
from .errors import EmbeddingError, PromptOverflow
from .session import Turn, TurnKind

DEFAULT_DIMENSION = 512
DEFAULT_K = 5
DEFAULT_PROMPT_BUDGET = 8000


def estimate_tokens(text: str) -> int:
    """Crude but monotone size estimate used for budget enforcement."""
    return math.ceil(len(text) / 4)


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedTrigramProvider:
    """Deterministic, dependency-free embedding: character trigrams of the
    normalized text, hashed into a fixed-width term-frequency vector and
    L2-normalized. Adequate for name-level semantic matching and tests."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION) -> None:
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            padded = f" {token} "
            for i in range(len(padded) - 2):
                gram = padded[i : i + 3]
                vec[zlib.crc32(gram.encode("utf-8")) % self.dimension] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class SentenceTransformerProvider:
    """Sentence-transformer embeddings behind the same interface; optional
    because it requires downloaded model weights."""

    def __init__(self, model_name: str = "all-MiniLM-L6-v2") -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise EmbeddingError("sentence-transformers is not installed") from exc
        self._model = SentenceTransformer(model_name)
        self.dimension = int(self._model.get_sentence_embedding_dimension())

    def embed(self, text: str) -> np.ndarray:  # pragma: no cover - needs weights
        vec = np.asarray(self._model.encode([text])[0], dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


@dataclass(frozen=True)
class TableCandidate:
    table: str
    score: float


@dataclass
class TableIndex:
    """Immutable after build; rebuilds swap atomically at the holder."""

    names: tuple[str, ...]
    matrix: np.ndarray  # shape (n_tables, dimension), unit rows
    provider: EmbeddingProvider

    def __len__(self) -> int:
        return len(self.names)


def build_index(tables: Sequence[str], provider: EmbeddingProvider) -> TableIndex:
    lowered = [t.lower() for t in tables]
    if len(set(lowered)) != len(lowered):
        raise ValueError("table names must be unique")
    try:
        if tables:
            matrix = np.stack([provider.embed(name) for name in tables])
        else:
            matrix = np.zeros((0, provider.dimension), dtype=np.float64)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(str(exc)) from exc
    return TableIndex(names=tuple(tables), matrix=matrix, provider=provider)


def search_tables_by_name(index: TableIndex, query: str, k: int = DEFAULT_K) -> list[TableCandidate]:
    """Top-k candidates sorted by score descending, name ascending on ties.
    An exact case-insensitive name match always ranks first."""
    if k <= 0:
        raise ValueError("k must be positive")
    if not index.names:
        return []
    try:
        qvec = index.provider.embed(query)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(str(exc)) from exc
    scores = np.clip(index.matrix @ qvec, -1.0, 1.0)
    ranked = sorted(
        (TableCandidate(table=name, score=float(score))
         for name, score in zip(index.names, scores)),
        key=lambda c: (-c.score, c.table),
    )
    exact = query.strip().lower()
    for pos, cand in enumerate(ranked):
        if cand.table.lower() == exact and pos > 0:
            ranked.insert(0, ranked.pop(pos))
            break
    return ranked[:k]


# ── rendered schema context ────────────────────────────────────────────────

_HEADER = "| Name | Type | Nullable | Constraint |"
_RULE = "| --- | --- | --- | --- |"


@dataclass
class SchemaContext:
    tables: list[TableSchema] = field(default_factory=list)
    rendered: str = ""
    token_estimate: int = 0


def _constraint_fragments(schema: TableSchema, column: str) -> list[str]:
    """Constraint cell text for one column. A constraint renders on the row
    of its first column; composite constraints spell out their column list."""
    fragments = []
    for con in schema.constraints:
        if not con.columns or con.columns[0] != column:
            continue
        cols = ", ".join(con.columns)
        if con.kind == "primary_key":
            fragments.append(
                "PRIMARY KEY" if len(con.columns) == 1 else f"PRIMARY KEY ({cols})"
            )
        elif con.kind == "foreign_key":
            ref_cols = ", ".join(con.referenced_columns or [])
            target = f"{con.referenced_table}({ref_cols})" if ref_cols else f"{con.referenced_table}"
            fragments.append(f"FOREIGN KEY ({cols}) REFERENCES {target}")
        elif con.kind == "unique":
            fragments.append(
                "UNIQUE" if len(con.columns) == 1 else f"UNIQUE ({cols})"
            )
    return fragments


def render_table(schema: TableSchema) -> str:
    lines = [f"### {schema.name}", "", _HEADER, _RULE]
    for col in schema.columns:
        constraint = "; ".join(_constraint_fragments(schema, col.name))
        nullable = "yes" if col.nullable else "no"
        lines.append(
            f"| {col.name} | {col.declared_type} | {nullable} | {constraint} |"
        )
    return "\n".join(lines)


def build_schema_context(
    db: Database,
    candidates: Sequence[TableCandidate],
    budget: int = DEFAULT_PROMPT_BUDGET,
) -> SchemaContext:
    """Retrieve candidate schemas in rank order and render them until the
    token budget is exhausted."""
    tables: list[TableSchema] = []
    blocks: list[str] = []
    used = 0
    for cand in candidates:
        schema = db.get_table_schema(cand.table)
        block = render_table(schema)
        cost = estimate_tokens(block) + (1 if blocks else 0)
        if used + cost > budget:
            break
        tables.append(schema)
        blocks.append(block)
        used += cost
    rendered = "\n\n".join(blocks)
    return SchemaContext(
        tables=tables, rendered=rendered, token_estimate=estimate_tokens(rendered)
    )


_CONSTRAINT_RE = re.compile(
    r"(?P<kind>PRIMARY KEY|FOREIGN KEY|UNIQUE)"
    r"(?:\s*\((?P<cols>[^)]*)\))?"
    r"(?:\s*REFERENCES\s*(?P<ref>[\w.]+)(?:\((?P<refcols>[^)]*)\))?)?"
)


def parse_schema_context(rendered: str) -> list[TableSchema]:
    """Inverse of render_table over a rendered context; recovers every column
    name, type, nullability, and constraint. Exists so tests can prove the
    rendered grammar is lossless."""
    tables: list[TableSchema] = []
    current: TableSchema | None = None
    for line in rendered.splitlines():
        line = line.strip()
        if line.startswith("### "):
            current = TableSchema(name=line[4:].strip())
            tables.append(current)
            continue
        if current is None or not line.startswith("|") or line in (_HEADER, _RULE):
            continue
        cells = [c.strip() for c in line.strip("|").split("|")]
        if len(cells) != 4 or cells[0] == "Name":
            continue
        name, declared_type, nullable, constraint_text = cells
        is_pk = False
        for m in _CONSTRAINT_RE.finditer(constraint_text):
            kind_text = m.group("kind")
            cols = (
                [c.strip() for c in m.group("cols").split(",")]
                if m.group("cols")
                else [name]
            )
            if kind_text == "PRIMARY KEY":
                kind = "primary_key"
                if name in cols:
                    is_pk = True
            elif kind_text == "FOREIGN KEY":
                kind = "foreign_key"
            else:
                kind = "unique"
            refcols = m.group("refcols")
            current.constraints.append(
                ConstraintSpec(
                    kind=kind,
                    columns=cols,
                    referenced_table=m.group("ref"),
                    referenced_columns=(
                        [c.strip() for c in refcols.split(",")] if refcols else None
                    ),
                )
            )
        # Composite PKs mark member columns on the first column's row only;
        # resolve membership after all rows are read (below).
        current.columns.append(
            ColumnSpec(
                name=name,
                declared_type=declared_type,
                nullable=nullable == "yes",
                is_primary_key=is_pk,
            )
        )
    for table in tables:
        pk_cols = {
            c
            for con in table.constraints
            if con.kind == "primary_key"
            for c in con.columns
        }
        for col in table.columns:
            col.is_primary_key = col.name in pk_cols
    return tables


# ── prompt assembly ────────────────────────────────────────────────────────

SECTION_SYSTEM = "System"
SECTION_SCHEMA = "Schema"
SECTION_HISTORY = "History"
SECTION_USER = "User"


def summarize_turn(turn: Turn) -> str:
    """One deterministic history line per turn. Error observations keep
    their content verbatim: the auto-debug loop needs the authentic text."""
    p = turn.payload
    if turn.kind in (TurnKind.USER_MESSAGE, TurnKind.CONFIRMATION_REPLY,
                     TurnKind.FINAL_ANSWER, TurnKind.REASONING,
                     TurnKind.CONFIRMATION_REQUEST, TurnKind.ERROR):
        body = str(p.get("text", ""))
    elif turn.kind is TurnKind.TOOL_CALL:
        args = p.get("arguments", {})
        body = f"{p.get('tool')}({args.get('sql') or args.get('query') or args})"
    elif turn.kind is TurnKind.TOOL_RESULT:
        obs = p.get("observation", {})
        content = obs.get("content")
        if obs.get("source") == "db_error":
            body = f"error: {content}"
        elif isinstance(content, dict) and "rows" in content:
            rows = content.get("rows", [])
            body = (
                f"columns={content.get('column_names')} rows={rows}"
                + (" (truncated)" if content.get("truncated") else "")
            )
        else:
            body = str(content)
    elif turn.kind is TurnKind.PLAN_PROPOSAL:
        steps = "; ".join(s.get("description", "") for s in p.get("steps", []))
        body = f"plan {p.get('plan_id')}: {steps}"
    else:  # pragma: no cover - all kinds handled above
        body = str(p)
    return f"[{turn.index}] {turn.actor.value}/{turn.kind.value}: {body}"


def render_sections(sections: list[tuple[str, str]]) -> str:
    return "\n\n".join(f"## {label}\n{text}" for label, text in sections)


def assemble_sections(
    user_query: str,
    history: Iterable[Turn],
    context: SchemaContext,
    system_rules: str,
    budget: int = DEFAULT_PROMPT_BUDGET,
) -> list[tuple[str, str]]:
    """Prompt sections in fixed order: system rules, schema context, bounded
    recent history (oldest trimmed first), then the user query. Raises
    PromptOverflow when even the history-free prompt exceeds the budget."""

    def _compose(lines: list[str]) -> list[tuple[str, str]]:
        sections = [
            (SECTION_SYSTEM, system_rules),
            (SECTION_SCHEMA, context.rendered),
        ]
        if lines:
            sections.append((SECTION_HISTORY, "\n".join(lines)))
        sections.append((SECTION_USER, user_query))
        return sections

    base = render_sections(_compose([]))
    if estimate_tokens(base) > budget:
        raise PromptOverflow(
            f"prompt needs {estimate_tokens(base)} tokens, budget is {budget}"
        )
    all_lines = [summarize_turn(t) for t in history]
    included: list[str] = []
    for line in reversed(all_lines):
        attempt = render_sections(_compose([line] + included))
        if estimate_tokens(attempt) > budget:
            break
        included.insert(0, line)
    return _compose(included)


def assemble_prompt(
    user_query: str,
    history: Iterable[Turn],
    context: SchemaContext,
    system_rules: str,
    budget: int = DEFAULT_PROMPT_BUDGET,
) -> str:
    """Deterministic concatenation of the assembled prompt sections."""
    return render_sections(
        assemble_sections(user_query, history, context, system_rules, budget)
    )
