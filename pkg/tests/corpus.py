"""Hand-labeled SQL corpus: ground truth for kind, state-modification, and
destructiveness across all statement kinds. Labels were assigned by hand when
each statement was added; the classifier must agree with every one."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CorpusItem:
    sql: str
    kind: str
    state_modifying: bool
    destructive: bool
    star: bool = False


def _item(sql, kind, modifying, destructive=False, star=False) -> CorpusItem:
    return CorpusItem(sql, kind, modifying, destructive, star)


CORPUS: list[CorpusItem] = [
    # selects
    _item("SELECT name FROM users", "select", False),
    _item("SELECT * FROM logs", "select", False, star=True),
    _item("SELECT count(*) FROM orders", "select", False),
    _item(
        "SELECT u.name, o.total FROM users u JOIN orders o ON o.user_id = u.id",
        "select", False,
    ),
    _item("select distinct city from users where city is not null", "select", False),
    _item(
        "WITH recent AS (SELECT id FROM orders WHERE order_date > '2024-01-01') "
        "SELECT count(*) FROM recent",
        "select", False,
    ),
    _item("SELECT price FROM products ORDER BY price DESC LIMIT 3", "select", False),
    _item(
        "SELECT name FROM products WHERE id IN (SELECT product_id FROM order_items)",
        "select", False,
    ),
    _item("SELECT 1", "select", False),
    _item("SELECT users.* FROM users", "select", False, star=True),
    _item("SELECT * FROM employees", "select", False, star=True),
    _item("select * from users", "select", False, star=True),
    # read-only admin-ish
    _item("EXPLAIN QUERY PLAN SELECT name FROM users", "other", False),
    _item("PRAGMA table_info(users)", "other", False),
    _item("SHOW TABLES", "other", False),
    _item("VALUES (1, 2)", "other", False),
    # inserts
    _item(
        "INSERT INTO logs (created_at, message) VALUES ('2024-05-01', 'test')",
        "insert", True,
    ),
    _item("INSERT INTO users (id, name) VALUES (99, 'Zed')", "insert", True),
    _item("insert into categories values (3, 'misc')", "insert", True),
    _item("REPLACE INTO categories VALUES (1, 'tech')", "insert", True),
    _item("INSERT INTO logs SELECT * FROM logs", "insert", True),
    # updates
    _item("UPDATE users SET city = 'Hanoi' WHERE id = 2", "update", True),
    _item("UPDATE products SET price = price * 1.1", "update", True),
    _item("update employees set salary = 70000 where name = 'Ha'", "update", True),
    _item(
        "WITH x AS (SELECT 1) UPDATE users SET name = 'A' WHERE id = 1",
        "update", True,
    ),
    _item("UPDATE orders SET total = 0 WHERE total IS NULL", "update", True),
    # deletes
    _item("DELETE FROM logs WHERE created_at < '2024-01-01'", "delete", True),
    _item("DELETE FROM logs", "delete", True),
    _item("delete from reviews where rating < 2", "delete", True),
    _item("DELETE FROM order_items WHERE order_id = 5", "delete", True),
    # create
    _item(
        "CREATE TABLE archive_logs (id INTEGER PRIMARY KEY, message TEXT)",
        "ddl_create", True,
    ),
    _item("CREATE INDEX idx_orders_date ON orders (order_date)", "ddl_create", True),
    _item(
        "CREATE VIEW big_orders AS SELECT * FROM orders WHERE total > 100",
        "ddl_create", True,
    ),
    _item("create table t2 as select * from users", "ddl_create", True),
    # drop / truncate: destructive
    _item("DROP TABLE logs", "ddl_drop", True, destructive=True),
    _item("DROP TABLE IF EXISTS archive_logs", "ddl_drop", True, destructive=True),
    _item("drop index idx_orders_date", "ddl_drop", True, destructive=True),
    _item("DROP VIEW big_orders", "ddl_drop", True, destructive=True),
    _item("TRUNCATE TABLE logs", "ddl_truncate", True, destructive=True),
    _item("TRUNCATE logs", "ddl_truncate", True, destructive=True),
    _item("truncate table audit_events", "ddl_truncate", True, destructive=True),
    # alter
    _item("ALTER TABLE users ADD COLUMN nickname TEXT", "ddl_alter", True),
    _item("ALTER TABLE products RENAME TO catalog_products", "ddl_alter", True),
    _item("alter table employees drop column phone", "ddl_alter", True),
    # transaction control
    _item("BEGIN", "transaction_control", True),
    _item("BEGIN TRANSACTION", "transaction_control", True),
    _item("COMMIT", "transaction_control", True),
    _item("ROLLBACK", "transaction_control", True),
    _item("SAVEPOINT sp1", "transaction_control", True),
    # state-touching admin
    _item("VACUUM", "other", True),
    _item("REINDEX", "other", True),
    _item("ANALYZE", "other", True),
    _item("GRANT SELECT ON users TO analyst", "other", True),
    _item("ATTACH DATABASE '/nonexistent_dir/other.db' AS other", "other", True),
    _item("PRAGMA journal_mode = WAL", "other", True),
    _item("SET search_path = public", "other", True),
    # fail-safe composites
    _item(
        "WITH doomed AS (DELETE FROM logs RETURNING id) SELECT count(*) FROM doomed",
        "other", True,
    ),
    _item("SELECT name INTO saved_names FROM users", "other", True),
]

STAR_SELECTS = [item for item in CORPUS if item.star]
STATE_MODIFYING = [item for item in CORPUS if item.state_modifying]
DESTRUCTIVE = [item for item in CORPUS if item.destructive]
