"""Uniform access to SQL engines: schema introspection and guarded execution.

The first-class engine is embedded SQLite (sufficient for desk-scale
verification and the eval harness); anything that speaks the same interface
can sit behind Database. Engine error text passes through unmodified because
the auto-debug loop reasons over the authentic message.
"""

from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import (
    DatabaseConnectionError,
    DbError,
    NoSuchTable,
    PreconditionViolation,
    QueryTimeout,
)
from .sqlanalyzer import profile_statement

DEFAULT_ROW_LIMIT = 1000
DEFAULT_TIMEOUT = 30.0

Scalar = Any  # null | integer | real | text | blob


@dataclass
class ColumnSpec:
    name: str
    declared_type: str
    nullable: bool = True
    is_primary_key: bool = False


@dataclass
class ConstraintSpec:
    kind: str  # primary_key | foreign_key | unique
    columns: list[str]
    referenced_table: str | None = None
    referenced_columns: list[str] | None = None


@dataclass
class TableSchema:
    name: str
    columns: list[ColumnSpec] = field(default_factory=list)
    constraints: list[ConstraintSpec] = field(default_factory=list)

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


@dataclass
class RowSet:
    column_names: list[str]
    rows: list[tuple[Scalar, ...]]
    truncated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "column_names": list(self.column_names),
            "rows": [list(r) for r in self.rows],
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RowSet":
        return cls(
            column_names=list(data["column_names"]),
            rows=[tuple(r) for r in data["rows"]],
            truncated=bool(data.get("truncated", False)),
        )


def parse_db_url(url: str) -> str:
    """Resolve a connection URL to an SQLite path. Accepted forms:
    ``sqlite:///relative/or/absolute.db``, ``sqlite://:memory:``, a bare
    filesystem path, or ``:memory:``."""
    if url.startswith("sqlite:///"):
        return url[len("sqlite:///"):] or ":memory:"
    if url.startswith("sqlite://"):
        rest = url[len("sqlite://"):]
        return rest or ":memory:"
    return url


class Database:
    """One open connection to one database. Not shared across sessions;
    introspection results are immutable snapshots that may be."""

    def __init__(self, conn: sqlite3.Connection, ref: str,
                 row_limit: int = DEFAULT_ROW_LIMIT,
                 timeout: float = DEFAULT_TIMEOUT) -> None:
        self._conn = conn
        self.ref = ref
        self.row_limit = row_limit
        self.timeout = timeout

    @classmethod
    def connect(cls, url: str, *, create: bool = False,
                row_limit: int = DEFAULT_ROW_LIMIT,
                timeout: float = DEFAULT_TIMEOUT) -> "Database":
        path = parse_db_url(url)
        if path != ":memory:" and not create and not Path(path).exists():
            raise DatabaseConnectionError(f"database file does not exist: {path}")
        try:
            conn = sqlite3.connect(path, check_same_thread=False)
        except sqlite3.Error as exc:
            raise DatabaseConnectionError(str(exc)) from exc
        conn.execute("PRAGMA foreign_keys = ON")
        return cls(conn, ref=url, row_limit=row_limit, timeout=timeout)

    def close(self) -> None:
        self._conn.close()

    # ── introspection ──────────────────────────────────────────────────

    def list_tables(self) -> list[str]:
        try:
            cur = self._conn.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table'"
                " AND name NOT LIKE 'sqlite_%'"
            )
            return sorted(row[0] for row in cur.fetchall())
        except sqlite3.Error as exc:
            raise DatabaseConnectionError(str(exc)) from exc

    def table_exists(self, table: str) -> bool:
        cur = self._conn.execute(
            "SELECT 1 FROM sqlite_master WHERE type = 'table' AND lower(name) = lower(?)",
            (table,),
        )
        return cur.fetchone() is not None

    def resolve_table(self, table: str) -> str:
        """Case-insensitive lookup returning the stored spelling."""
        cur = self._conn.execute(
            "SELECT name FROM sqlite_master WHERE type = 'table' AND lower(name) = lower(?)",
            (table,),
        )
        row = cur.fetchone()
        if row is None:
            raise NoSuchTable(table)
        return row[0]

    def get_table_schema(self, table: str) -> TableSchema:
        name = self.resolve_table(table)
        quoted = _quote_ident(name)
        info = self._conn.execute(f"PRAGMA table_info({quoted})").fetchall()
        pk_cols = [(row[5], row[1]) for row in info if row[5] > 0]
        pk_cols.sort()
        pk_names = [c for _, c in pk_cols]
        columns = [
            ColumnSpec(
                name=row[1],
                declared_type=row[2] or "",
                nullable=not row[3],
                is_primary_key=row[1] in pk_names,
            )
            for row in info
        ]

        constraints: list[ConstraintSpec] = []
        if pk_names:
            constraints.append(ConstraintSpec(kind="primary_key", columns=pk_names))

        fk_rows = self._conn.execute(f"PRAGMA foreign_key_list({quoted})").fetchall()
        by_id: dict[int, list[tuple]] = {}
        for row in fk_rows:
            by_id.setdefault(row[0], []).append(row)
        fks = []
        for _, group in sorted(by_id.items()):
            group.sort(key=lambda r: r[1])  # seq order
            ref_cols = [r[4] for r in group]
            fks.append(
                ConstraintSpec(
                    kind="foreign_key",
                    columns=[r[3] for r in group],
                    referenced_table=group[0][2],
                    referenced_columns=ref_cols if all(ref_cols) else None,
                )
            )
        constraints.extend(sorted(fks, key=lambda c: (c.referenced_table or "", c.columns)))

        uniques = []
        for idx in self._conn.execute(f"PRAGMA index_list({quoted})").fetchall():
            if idx[3] != "u":  # only declared UNIQUE constraints
                continue
            cols = [
                r[2]
                for r in self._conn.execute(
                    f"PRAGMA index_info({_quote_ident(idx[1])})"
                ).fetchall()
            ]
            uniques.append(ConstraintSpec(kind="unique", columns=cols))
        constraints.extend(sorted(uniques, key=lambda c: c.columns))

        return TableSchema(name=name, columns=columns, constraints=constraints)

    def table_row_counts(self) -> dict[str, int]:
        """Row count per table; supplies the optional stats map used by the
        large-table risk rule."""
        counts = {}
        for table in self.list_tables():
            cur = self._conn.execute(f"SELECT count(*) FROM {_quote_ident(table)}")
            counts[table] = cur.fetchone()[0]
        return counts

    # ── execution ──────────────────────────────────────────────────────

    def run_select(self, sql: str, row_limit: int | None = None,
                   timeout: float | None = None) -> RowSet:
        """Execute a read-only statement. Enforced twice: by classification
        (PreconditionViolation) and by the engine's query_only mode."""
        profile = profile_statement(sql)
        if profile.is_state_modifying:
            raise PreconditionViolation(
                f"state-modifying statement passed to run_select: {profile.kind.value}"
            )
        limit = self.row_limit if row_limit is None else row_limit
        self._conn.execute("PRAGMA query_only = ON")
        try:
            with self._deadline(timeout):
                try:
                    cur = self._conn.execute(sql)
                    rows = cur.fetchmany(limit + 1)
                except sqlite3.OperationalError as exc:
                    if "interrupted" in str(exc):
                        raise QueryTimeout(f"query exceeded {timeout or self.timeout}s") from exc
                    raise DbError(str(exc)) from exc
                except sqlite3.Error as exc:
                    raise DbError(str(exc)) from exc
        finally:
            self._conn.execute("PRAGMA query_only = OFF")
        columns = [d[0] for d in cur.description] if cur.description else []
        truncated = len(rows) > limit
        return RowSet(
            column_names=columns,
            rows=[tuple(r) for r in rows[:limit]],
            truncated=truncated,
        )

    def run_non_query(self, sql: str, timeout: float | None = None) -> int:
        """Execute a state-modifying statement; returns affected-row count
        (0 for DDL). Authorization is the tool registry's job, not this one."""
        with self._deadline(timeout):
            try:
                cur = self._conn.execute(sql)
                self._conn.commit()
            except sqlite3.OperationalError as exc:
                self._conn.rollback()
                if "interrupted" in str(exc):
                    raise QueryTimeout(f"statement exceeded {timeout or self.timeout}s") from exc
                raise DbError(str(exc)) from exc
            except sqlite3.Error as exc:
                self._conn.rollback()
                raise DbError(str(exc)) from exc
        return max(0, cur.rowcount)

    def execute_script(self, script: str) -> None:
        """Apply a multi-statement setup script (fixtures, seeds)."""
        try:
            self._conn.executescript(script)
            self._conn.commit()
        except sqlite3.Error as exc:
            raise DbError(str(exc)) from exc

    def dump(self) -> str:
        """Full logical dump; byte-identical dumps mean identical state."""
        return "\n".join(self._conn.iterdump())

    def _deadline(self, timeout: float | None):
        return _Deadline(self._conn, timeout if timeout is not None else self.timeout)


class _Deadline:
    """Aborts statements via the progress handler once the budget elapses."""

    def __init__(self, conn: sqlite3.Connection, seconds: float) -> None:
        self._conn = conn
        self._seconds = seconds

    def __enter__(self):
        deadline = time.monotonic() + self._seconds
        self._conn.set_progress_handler(
            lambda: 1 if time.monotonic() > deadline else 0, 10_000
        )
        return self

    def __exit__(self, *exc_info):
        self._conn.set_progress_handler(None, 0)
        return False


def _quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def schema_to_ddl(schema: TableSchema) -> str:
    """CREATE TABLE statement equivalent to the introspected schema; applying
    it to a fresh database and re-introspecting round-trips the schema."""
    lines = [
        f"  {_quote_ident(c.name)} {c.declared_type}".rstrip()
        + ("" if c.nullable else " NOT NULL")
        for c in schema.columns
    ]
    for con in schema.constraints:
        cols = ", ".join(_quote_ident(c) for c in con.columns)
        if con.kind == "primary_key":
            lines.append(f"  PRIMARY KEY ({cols})")
        elif con.kind == "foreign_key":
            ref = _quote_ident(con.referenced_table or "")
            if con.referenced_columns:
                ref_cols = ", ".join(_quote_ident(c) for c in con.referenced_columns)
                lines.append(f"  FOREIGN KEY ({cols}) REFERENCES {ref} ({ref_cols})")
            else:
                lines.append(f"  FOREIGN KEY ({cols}) REFERENCES {ref}")
        elif con.kind == "unique":
            lines.append(f"  UNIQUE ({cols})")
    body = ",\n".join(lines)
    return f"CREATE TABLE {_quote_ident(schema.name)} (\n{body}\n)"
