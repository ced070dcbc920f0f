from __future__ import annotations

import pytest

from dbcopilot.dbadapter import (
    ColumnSpec,
    ConstraintSpec,
    Database,
    RowSet,
    TableSchema,
    parse_db_url,
    schema_to_ddl,
)
from dbcopilot.errors import (
    DatabaseConnectionError,
    DbError,
    NoSuchTable,
    PreconditionViolation,
)


class TestConnect:
    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DatabaseConnectionError):
            Database.connect(str(tmp_path / "absent.sqlite"))

    def test_create_flag_allows_new_file(self, tmp_path):
        db = Database.connect(str(tmp_path / "new.sqlite"), create=True)
        assert db.list_tables() == []
        db.close()

    def test_url_forms(self):
        assert parse_db_url("sqlite:///tmp/x.db") == "tmp/x.db"
        assert parse_db_url("sqlite:///:memory:") == ":memory:"
        assert parse_db_url(":memory:") == ":memory:"
        assert parse_db_url("plain/path.db") == "plain/path.db"


class TestListTables:
    def test_empty_database(self, tmp_path):
        db = Database.connect(str(tmp_path / "e.sqlite"), create=True)
        assert db.list_tables() == []
        db.close()

    def test_lexicographic_order(self, tmp_path):
        db = Database.connect(":memory:", create=True)
        db.execute_script("CREATE TABLE users (id); CREATE TABLE orders (id);")
        assert db.list_tables() == ["orders", "users"]
        db.close()

    def test_demo_fixture_has_eight_tables(self, demo_db):
        assert demo_db.list_tables() == [
            "categories",
            "employees",
            "logs",
            "order_items",
            "orders",
            "products",
            "reviews",
            "users",
        ]


class TestGetTableSchema:
    def test_pk_and_fk_constraints(self, demo_db):
        schema = demo_db.get_table_schema("orders")
        kinds = [c.kind for c in schema.constraints]
        assert kinds.count("primary_key") == 1
        assert kinds.count("foreign_key") == 1
        fk = next(c for c in schema.constraints if c.kind == "foreign_key")
        assert fk.columns == ["user_id"]
        assert fk.referenced_table == "users"
        assert fk.referenced_columns == ["id"]

    def test_no_constraints(self, tmp_path):
        db = Database.connect(":memory:", create=True)
        db.execute_script("CREATE TABLE bare (a TEXT, b INTEGER)")
        assert db.get_table_schema("bare").constraints == []
        db.close()

    def test_nonexistent_table(self, demo_db):
        with pytest.raises(NoSuchTable):
            demo_db.get_table_schema("nope")

    def test_columns_in_declared_order(self, demo_db):
        schema = demo_db.get_table_schema("users")
        assert schema.column_names() == ["id", "name", "email", "city", "user_bio"]
        assert schema.columns[0].is_primary_key
        assert not schema.columns[1].nullable  # name TEXT NOT NULL

    def test_round_trip_through_generated_ddl(self, demo_db, tmp_path):
        fresh = Database.connect(":memory:", create=True)
        for table in demo_db.list_tables():
            original = demo_db.get_table_schema(table)
            fresh.execute_script(schema_to_ddl(original))
            assert fresh.get_table_schema(table) == original
        fresh.close()

    def test_round_trip_composite_and_unique(self):
        db = Database.connect(":memory:", create=True)
        db.execute_script(
            "CREATE TABLE grades ("
            " student_id INTEGER NOT NULL,"
            " course_id INTEGER NOT NULL,"
            " grade TEXT,"
            " PRIMARY KEY (student_id, course_id),"
            " UNIQUE (grade))"
        )
        original = db.get_table_schema("grades")
        fresh = Database.connect(":memory:", create=True)
        fresh.execute_script(schema_to_ddl(original))
        assert fresh.get_table_schema("grades") == original
        db.close()
        fresh.close()


class TestRunSelect:
    def test_select_one(self, demo_db):
        rowset = demo_db.run_select("SELECT 1")
        assert rowset.rows == [(1,)]
        assert not rowset.truncated

    def test_row_limit_truncation(self, tmp_path):
        db = Database.connect(":memory:", create=True)
        db.execute_script("CREATE TABLE big (n INTEGER)")
        db.execute_script(
            "INSERT INTO big SELECT value FROM (WITH RECURSIVE seq(value) AS "
            "(SELECT 1 UNION ALL SELECT value + 1 FROM seq WHERE value < 2000) "
            "SELECT value FROM seq)"
        )
        rowset = db.run_select("SELECT n FROM big", row_limit=1000)
        assert len(rowset.rows) == 1000
        assert rowset.truncated
        db.close()

    def test_engine_error_text_surfaced_verbatim(self, demo_db):
        with pytest.raises(DbError) as excinfo:
            demo_db.run_select("SELECT nam FROM users")
        assert "no such column" in str(excinfo.value)
        assert "nam" in str(excinfo.value)

    def test_state_modifying_rejected(self, demo_db):
        with pytest.raises(PreconditionViolation):
            demo_db.run_select("DELETE FROM logs")

    def test_read_only_even_for_sneaky_other(self, demo_db):
        # PRAGMA with assignment classifies state-modifying and is rejected.
        with pytest.raises(PreconditionViolation):
            demo_db.run_select("PRAGMA journal_mode = WAL")

    def test_select_never_changes_state(self, demo_db):
        before = demo_db.dump()
        demo_db.run_select("SELECT * FROM users")
        demo_db.run_select("SELECT count(*) FROM orders")
        assert demo_db.dump() == before


class TestRunNonQuery:
    def test_update_counts_rows(self):
        db = Database.connect(":memory:", create=True)
        db.execute_script(
            "CREATE TABLE t (x INTEGER); INSERT INTO t VALUES (1), (2), (3)"
        )
        assert db.run_non_query("UPDATE t SET x = 1") == 3
        db.close()

    def test_ddl_returns_zero(self):
        db = Database.connect(":memory:", create=True)
        assert db.run_non_query("CREATE TABLE z (a int)") == 0
        db.close()

    def test_constraint_failure_raises_db_error(self):
        db = Database.connect(":memory:", create=True)
        db.execute_script("CREATE TABLE u (id INTEGER PRIMARY KEY)")
        db.run_non_query("INSERT INTO u VALUES (1)")
        with pytest.raises(DbError):
            db.run_non_query("INSERT INTO u VALUES (1)")
        db.close()


class TestRowCounts:
    def test_table_row_counts(self, demo_db):
        counts = demo_db.table_row_counts()
        assert counts["users"] == 4
        assert counts["logs"] == 5


class TestRowSet:
    def test_round_trip(self):
        rs = RowSet(column_names=["a", "b"], rows=[(1, "x"), (None, 2.5)], truncated=True)
        assert RowSet.from_dict(rs.to_dict()) == rs

    def test_scalar_types_preserved(self, demo_db):
        rowset = demo_db.run_select(
            "SELECT id, name, price, NULL, x'ff' FROM products LIMIT 1"
        )
        row = rowset.rows[0]
        assert isinstance(row[0], int)
        assert isinstance(row[1], str)
        assert isinstance(row[2], float)
        assert row[3] is None
        assert isinstance(row[4], bytes)


def test_schema_to_ddl_quotes_identifiers():
    schema = TableSchema(
        name="order details",
        columns=[ColumnSpec(name="id", declared_type="INTEGER", nullable=False)],
        constraints=[ConstraintSpec(kind="primary_key", columns=["id"])],
    )
    ddl = schema_to_ddl(schema)
    assert '"order details"' in ddl
    db = Database.connect(":memory:", create=True)
    db.execute_script(ddl)
    assert db.list_tables() == ["order details"]
    db.close()
