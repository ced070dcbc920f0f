"""Syntactic SQL statement profiling for risk classification.

profile_statement() extracts the structural features the safety layer needs:
statement kind, whether it modifies state, whether it is destructive, star
projection, referenced tables, and WHERE presence. Classification is purely
syntactic and deterministic; no SQL parser package is required. The design is
fail-safe: anything that cannot be positively identified as read-only is
treated as state-modifying.

extract_entity_mentions() is the first pass of schema grounding: it turns a
natural-language utterance into candidate identifiers for the table index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from .errors import MultiStatementError, ParseError


class StatementKind(str, Enum):
    SELECT = "select"
    INSERT = "insert"
    UPDATE = "update"
    DELETE = "delete"
    DDL_CREATE = "ddl_create"
    DDL_DROP = "ddl_drop"
    DDL_TRUNCATE = "ddl_truncate"
    DDL_ALTER = "ddl_alter"
    TRANSACTION_CONTROL = "transaction_control"
    OTHER = "other"


@dataclass
class StatementProfile:
    kind: StatementKind
    is_state_modifying: bool
    is_destructive: bool
    has_star_projection: bool
    referenced_tables: list[str] = field(default_factory=list)
    has_where_clause: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "is_state_modifying": self.is_state_modifying,
            "is_destructive": self.is_destructive,
            "has_star_projection": self.has_star_projection,
            "referenced_tables": list(self.referenced_tables),
            "has_where_clause": self.has_where_clause,
        }


# ── tokenizer ──────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<line_comment>--[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<string>'(?:[^']|'')*')
  | (?P<qident>"(?:[^"]|"")*"|`[^`]*`|\[[^\]]*\])
  | (?P<word>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<number>\d+(?:\.\d*)?|\.\d+)
  | (?P<punct>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class _Token:
    type: str  # word | string | qident | number | punct
    value: str
    depth: int  # paren nesting depth at this token


def _tokenize(sql: str) -> list[_Token]:
    tokens: list[_Token] = []
    depth = 0
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:  # pragma: no cover - the punct branch matches any char
            raise ParseError(f"cannot tokenize SQL at offset {pos}")
        pos = m.end()
        if m.lastgroup in ("space", "line_comment", "block_comment"):
            continue
        value = m.group()
        if m.lastgroup == "string" and not value.endswith("'"):
            raise ParseError("unterminated string literal")
        if m.lastgroup == "punct":
            if value == "(":
                tokens.append(_Token("punct", value, depth))
                depth += 1
                continue
            if value == ")":
                depth = max(0, depth - 1)
        tokens.append(_Token(m.lastgroup or "punct", value, depth))
    # Detect an unterminated quote that the regex consumed greedily.
    if sql.count("'") % 2 == 1 and not any(
        t.type == "string" and t.value.count("'") % 2 == 1 for t in tokens
    ):
        raise ParseError("unterminated string literal")
    return tokens


def split_statements(sql: str) -> list[str]:
    """Split on top-level semicolons, ignoring ones inside strings/comments."""
    parts: list[str] = []
    buf: list[str] = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:  # pragma: no cover
            break
        pos = m.end()
        if m.lastgroup == "punct" and m.group() == ";":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(m.group())
    parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


# ── classification ─────────────────────────────────────────────────────────

_DML_WORDS = frozenset({"INSERT", "UPDATE", "DELETE", "MERGE", "REPLACE", "UPSERT"})

_TXN_WORDS = frozenset(
    {"BEGIN", "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE", "START", "END"}
)

# Recognized but unclassified statements that can change engine or data
# state; fail-safe means they route through the guarded execution path.
_ADMIN_WORDS = frozenset(
    {
        "GRANT", "REVOKE", "SET", "USE", "ATTACH", "DETACH", "VACUUM",
        "REINDEX", "ANALYZE", "CALL", "EXEC", "EXECUTE", "DO", "COPY",
        "LOAD", "IMPORT", "LOCK", "UNLOCK", "RENAME", "KILL", "FLUSH",
        "OPTIMIZE", "DENY", "BACKUP", "RESTORE",
    }
)

_READONLY_WORDS = frozenset({"SHOW", "DESC", "DESCRIBE", "EXPLAIN", "VALUES"})

# Words that terminate a table reference (cannot be an alias).
_CLAUSE_WORDS = frozenset(
    {
        "WHERE", "ON", "USING", "GROUP", "ORDER", "HAVING", "LIMIT", "OFFSET",
        "UNION", "INTERSECT", "EXCEPT", "JOIN", "LEFT", "RIGHT", "INNER",
        "OUTER", "CROSS", "FULL", "NATURAL", "SET", "VALUES", "SELECT",
        "FROM", "INTO", "WHEN", "THEN", "ELSE", "END", "AND", "OR", "NOT",
        "CASE", "EXISTS", "RETURNING", "WINDOW", "FETCH", "FOR", "WITH",
        "AS", "IS", "IN", "LIKE", "BETWEEN", "WHILE", "ADD", "DROP", "ALTER",
        "RENAME", "TO", "COLUMN", "MODIFY", "IF", "STRAIGHT_JOIN",
    }
)

_STATE_MODIFYING_LEADING = {
    "INSERT": StatementKind.INSERT,
    "REPLACE": StatementKind.INSERT,
    "UPDATE": StatementKind.UPDATE,
    "DELETE": StatementKind.DELETE,
    "CREATE": StatementKind.DDL_CREATE,
    "DROP": StatementKind.DDL_DROP,
    "TRUNCATE": StatementKind.DDL_TRUNCATE,
    "ALTER": StatementKind.DDL_ALTER,
    "MERGE": StatementKind.OTHER,
    "UPSERT": StatementKind.OTHER,
}


def _unquote(value: str) -> str:
    if value.startswith('"') and value.endswith('"'):
        return value[1:-1].replace('""', '"')
    if value.startswith("`") and value.endswith("`"):
        return value[1:-1]
    if value.startswith("[") and value.endswith("]"):
        return value[1:-1]
    return value


def _is_name(tok: _Token) -> bool:
    return tok.type == "qident" or (
        tok.type == "word" and tok.value.upper() not in _CLAUSE_WORDS
    )


def _iter_table_names(tokens: list[_Token]) -> Iterator[str]:
    """Best-effort table references from FROM/JOIN/INTO/UPDATE/TABLE clauses,
    including inside subqueries. Aliases are skipped when syntactically
    evident; derived tables (parenthesized subqueries) contribute via their
    inner FROM clauses as the scan continues through them."""
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.type != "word":
            i += 1
            continue
        upper = tok.value.upper()
        trigger = None
        if upper in ("FROM", "JOIN"):
            trigger = "list" if upper == "FROM" else "single"
        elif upper == "INTO":
            trigger = "single"
        elif upper == "UPDATE":
            prev = tokens[i - 1] if i > 0 else None
            if not (prev and prev.type == "word" and prev.value.upper() in ("FOR", "OR", "ON")):
                trigger = "single"
        elif upper == "TABLE":
            trigger = "single"
        if trigger is None:
            i += 1
            continue
        i += 1
        while i < n:
            # Skip qualifiers like IF [NOT] EXISTS and ONLY.
            while i < n and tokens[i].type == "word" and tokens[i].value.upper() in (
                "IF", "NOT", "EXISTS", "ONLY",
            ):
                i += 1
            if i >= n or not _is_name(tokens[i]):
                break
            name_parts = [_unquote(tokens[i].value)]
            i += 1
            while (
                i + 1 < n
                and tokens[i].type == "punct"
                and tokens[i].value == "."
                and _is_name(tokens[i + 1])
            ):
                name_parts.append(_unquote(tokens[i + 1].value))
                i += 2
            yield ".".join(name_parts)
            # Optional alias: AS x, or a bare non-clause word.
            if i < n and tokens[i].type == "word" and tokens[i].value.upper() == "AS":
                i += 2
            elif i < n and _is_name(tokens[i]) and tokens[i].type == "word":
                i += 1
            if (
                trigger == "list"
                and i < n
                and tokens[i].type == "punct"
                and tokens[i].value == ","
            ):
                i += 1
                continue
            break


def _referenced_tables(tokens: list[_Token]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for name in _iter_table_names(tokens):
        key = name.lower()
        if key not in seen:
            seen.add(key)
            out.append(name)
    return out


def _has_star_projection(tokens: list[_Token], select_pos: int) -> bool:
    """True when the projection list of the top-level SELECT contains a bare
    or qualified star. The rule is syntactic: COUNT(*) does not count (the
    star sits at a deeper paren level), arithmetic a*b does not count."""
    base_depth = tokens[select_pos].depth
    prev = tokens[select_pos]
    for tok in tokens[select_pos + 1:]:
        if tok.depth < base_depth:
            break
        if tok.depth == base_depth and tok.type == "word" and tok.value.upper() == "FROM":
            break
        if tok.depth == base_depth and tok.type == "punct" and tok.value == "*":
            if prev.type == "punct" and prev.value in (",", "."):
                return True
            if prev.type == "word" and prev.value.upper() in ("SELECT", "DISTINCT", "ALL"):
                return True
        if not (tok.type == "punct" and tok.value in ("(", ")")):
            prev = tok
    return False


def _fallback_profile(sql: str) -> StatementProfile:
    """Unparseable input: classify by leading keyword, erring toward
    state-modifying so the safety gates still fire."""
    m = re.match(r"\s*([A-Za-z_]+)", sql)
    leading = m.group(1).upper() if m else ""
    if leading in _STATE_MODIFYING_LEADING:
        kind = _STATE_MODIFYING_LEADING[leading]
        return StatementProfile(
            kind=kind,
            is_state_modifying=True,
            is_destructive=kind in (StatementKind.DDL_DROP, StatementKind.DDL_TRUNCATE),
            has_star_projection=False,
        )
    if leading in _ADMIN_WORDS or leading in _TXN_WORDS:
        return StatementProfile(
            kind=StatementKind.TRANSACTION_CONTROL
            if leading in _TXN_WORDS
            else StatementKind.OTHER,
            is_state_modifying=True,
            is_destructive=False,
            has_star_projection=False,
        )
    raise ParseError(f"unintelligible SQL: {sql[:80]!r}")


def profile_statement(sql: str) -> StatementProfile:
    """Profile a single SQL statement.

    Raises ParseError for unintelligible input and MultiStatementError when
    the input contains more than one statement.
    """
    if not sql or not sql.strip():
        raise ParseError("empty statement")
    statements = split_statements(sql)
    if len(statements) > 1:
        raise MultiStatementError(f"{len(statements)} statements in one input")
    if not statements:
        raise ParseError("empty statement")
    body = statements[0]

    try:
        tokens = _tokenize(body)
    except ParseError:
        return _fallback_profile(body)
    if not tokens:
        raise ParseError("empty statement")

    words = [t for t in tokens if t.type == "word"]
    first = words[0].value.upper() if words else ""
    if not first:
        raise ParseError(f"unintelligible SQL: {body[:80]!r}")

    tables = _referenced_tables(tokens)
    has_where = any(
        t.type == "word" and t.value.upper() == "WHERE" and t.depth == 0
        for t in tokens
    )

    def _profile(kind: StatementKind, modifying: bool, star: bool = False) -> StatementProfile:
        return StatementProfile(
            kind=kind,
            is_state_modifying=modifying,
            is_destructive=kind in (StatementKind.DDL_DROP, StatementKind.DDL_TRUNCATE),
            has_star_projection=star,
            referenced_tables=tables,
            has_where_clause=has_where,
        )

    if first == "WITH":
        return _profile_with(tokens, _profile)

    if first == "SELECT":
        return _profile_select(tokens, 0, _profile)

    if first in _STATE_MODIFYING_LEADING:
        return _profile(_STATE_MODIFYING_LEADING[first], True)

    if first in _TXN_WORDS:
        return _profile(StatementKind.TRANSACTION_CONTROL, True)

    if first == "PRAGMA":
        modifying = any(t.type == "punct" and t.value == "=" for t in tokens)
        return _profile(StatementKind.OTHER, modifying)

    if first in _READONLY_WORDS:
        return _profile(StatementKind.OTHER, False)

    if first in _ADMIN_WORDS:
        return _profile(StatementKind.OTHER, True)

    raise ParseError(f"unintelligible SQL: {body[:80]!r}")


def _select_token_pos(tokens: list[_Token], word: str, depth: int) -> int | None:
    for i, t in enumerate(tokens):
        if t.type == "word" and t.value.upper() == word and t.depth == depth:
            return i
    return None


def _profile_select(tokens, select_pos, make) -> StatementProfile:
    pos = _select_token_pos(tokens, "SELECT", tokens[select_pos].depth)
    star = _has_star_projection(tokens, pos if pos is not None else select_pos)
    # SELECT ... INTO creates a table despite the SELECT keyword.
    into_at_top = any(
        t.type == "word" and t.value.upper() == "INTO" and t.depth == 0
        for t in tokens
    )
    if into_at_top:
        return make(StatementKind.OTHER, True, star)
    return make(StatementKind.SELECT, False, star)


def _profile_with(tokens, make) -> StatementProfile:
    """A WITH statement classifies by its terminal statement; DML nested in a
    CTE body makes the whole statement state-modifying (fail-safe), which by
    the type invariants forces kind=other rather than kind=select."""
    terminal_pos = None
    terminal_word = None
    for i, t in enumerate(tokens):
        if t.type != "word" or t.depth != 0:
            continue
        upper = t.value.upper()
        if upper in ("SELECT", "INSERT", "UPDATE", "DELETE", "MERGE", "REPLACE"):
            terminal_pos = i
            terminal_word = upper
            break
    nested_dml = any(
        t.type == "word" and t.depth > 0 and t.value.upper() in _DML_WORDS
        for t in tokens[: terminal_pos if terminal_pos is not None else len(tokens)]
    )
    if terminal_word == "SELECT":
        if nested_dml:
            star = _has_star_projection(tokens, terminal_pos)
            return make(StatementKind.OTHER, True, star)
        return _profile_select(tokens, terminal_pos, make)
    if terminal_word in ("INSERT", "REPLACE"):
        return make(StatementKind.INSERT, True)
    if terminal_word == "UPDATE":
        return make(StatementKind.UPDATE, True)
    if terminal_word == "DELETE":
        return make(StatementKind.DELETE, True)
    if terminal_word in ("MERGE",):
        return make(StatementKind.OTHER, True)
    raise ParseError("WITH statement without a recognizable terminal statement")


# ── entity mentions ────────────────────────────────────────────────────────

_STOPWORDS = frozenset(
    """
    the and for with from that this what which where when how many much per
    each every all any som some are was were has have had does did doing
    show give find list get fetch display tell about them they their there
    who whom whose why not can could would should will shall may might must
    into onto over under between during before after above below out off
    you your our his her its than then them these those also just only very
    please want need see look make made using use used like top most least
    number count total sum average mean min max first last new old big small
    """.split()
)


def _plural_variants(word: str) -> Iterator[str]:
    if word.endswith("ies") and len(word) > 4:
        yield word[:-3] + "y"
    elif word.endswith(("ses", "xes", "zes", "ches", "shes")):
        yield word[:-2]
    elif word.endswith("s") and not word.endswith("ss"):
        yield word[:-1]
    if word.endswith("y") and not word.endswith(("ay", "ey", "oy", "uy")):
        yield word[:-1] + "ies"
    elif not word.endswith("s"):
        yield word + "s"


def extract_entity_mentions(utterance: str) -> list[str]:
    """Candidate schema identifiers from a user utterance: lowercased,
    deduplicated, with naive singular/plural variants both emitted so the
    table index can match either form. Never fails; an empty list is a
    valid result."""
    out: list[str] = []
    seen: set[str] = set()
    for word in re.findall(r"[a-z_][a-z0-9_]*", utterance.lower()):
        if len(word) < 3 or word in _STOPWORDS:
            continue
        for variant in (word, *_plural_variants(word)):
            if variant not in seen:
                seen.add(variant)
                out.append(variant)
    return out
