"""Bundled synthetic fixtures: a demo database for interactive use and unit
tests, plus a 10-task Spider-format mini-suite with per-task model scripts so
the whole pipeline can run offline end to end."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .dbadapter import Database
from .engine import AgentRuntime, EngineConfig, make_runtime
from .evalharness import EvalTask
from .llm import ScriptedBackend

DEMO_DDL = """
CREATE TABLE users (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  email TEXT,
  city TEXT,
  user_bio TEXT
);
CREATE TABLE categories (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL
);
CREATE TABLE products (
  id INTEGER PRIMARY KEY,
  category_id INTEGER,
  name TEXT NOT NULL,
  price REAL,
  FOREIGN KEY (category_id) REFERENCES categories (id)
);
CREATE TABLE orders (
  id INTEGER PRIMARY KEY,
  user_id INTEGER NOT NULL,
  order_date TEXT,
  total REAL,
  FOREIGN KEY (user_id) REFERENCES users (id)
);
CREATE TABLE order_items (
  order_id INTEGER NOT NULL,
  product_id INTEGER NOT NULL,
  quantity INTEGER NOT NULL,
  FOREIGN KEY (order_id) REFERENCES orders (id),
  FOREIGN KEY (product_id) REFERENCES products (id)
);
CREATE TABLE reviews (
  id INTEGER PRIMARY KEY,
  product_id INTEGER,
  user_id INTEGER,
  rating INTEGER,
  body TEXT,
  FOREIGN KEY (product_id) REFERENCES products (id),
  FOREIGN KEY (user_id) REFERENCES users (id)
);
CREATE TABLE employees (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  salary REAL,
  phone TEXT
);
CREATE TABLE logs (
  id INTEGER PRIMARY KEY,
  created_at TEXT,
  message TEXT
);

INSERT INTO users VALUES
  (1, 'An', 'an@example.com', 'Hanoi', 'Coffee enthusiast'),
  (2, 'Binh', 'binh@example.com', 'Hue', NULL),
  (3, 'Chi', 'chi@example.com', 'Hanoi', 'Runs a book club'),
  (4, 'Dung', NULL, 'Saigon', NULL);
INSERT INTO categories VALUES (1, 'electronics'), (2, 'office');
INSERT INTO products VALUES
  (1, 1, 'Laptop', 1200.0),
  (2, 1, 'Mouse', 25.5),
  (3, 2, 'Keyboard', 49.0),
  (4, 1, 'Monitor', 300.0);
INSERT INTO orders VALUES
  (1, 1, '2024-01-15', 1225.5),
  (2, 1, '2024-03-02', 49.0),
  (3, 2, '2023-11-20', 25.5),
  (4, 3, '2024-07-09', 600.0),
  (5, 4, '2023-05-01', 1347.0);
INSERT INTO order_items VALUES
  (1, 1, 1), (1, 2, 2), (2, 3, 1), (3, 2, 1), (4, 4, 2), (5, 1, 1), (5, 3, 3);
INSERT INTO reviews VALUES
  (1, 1, 1, 5, 'Fast and quiet'),
  (2, 2, 3, 4, 'Good value'),
  (3, 4, 2, 3, 'Decent panel');
INSERT INTO employees VALUES
  (1, 'Ha', 52000.0, '555-0101'),
  (2, 'Khoa', 61000.0, '555-0102');
INSERT INTO logs VALUES
  (1, '2024-01-01T00:00:00', 'boot'),
  (2, '2024-01-02T09:30:00', 'nightly vacuum finished'),
  (3, '2024-02-11T14:02:00', 'slow query on orders'),
  (4, '2024-03-05T08:00:00', 'backup verified'),
  (5, '2024-04-19T22:45:00', 'index rebuild');
"""

SHOP_DDL = """
CREATE TABLE users (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  city TEXT
);
CREATE TABLE products (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL,
  price REAL NOT NULL
);
CREATE TABLE orders (
  id INTEGER PRIMARY KEY,
  user_id INTEGER NOT NULL,
  order_date TEXT NOT NULL,
  FOREIGN KEY (user_id) REFERENCES users (id)
);
CREATE TABLE order_items (
  order_id INTEGER NOT NULL,
  product_id INTEGER NOT NULL,
  quantity INTEGER NOT NULL,
  FOREIGN KEY (order_id) REFERENCES orders (id),
  FOREIGN KEY (product_id) REFERENCES products (id)
);

INSERT INTO users VALUES
  (1, 'An', 'Hanoi'), (2, 'Binh', 'Hue'), (3, 'Chi', 'Hanoi'), (4, 'Dung', 'Saigon');
INSERT INTO products VALUES
  (1, 'Laptop', 1200.0), (2, 'Mouse', 25.5), (3, 'Keyboard', 49.0), (4, 'Monitor', 300.0);
INSERT INTO orders VALUES
  (1, 1, '2024-01-15'), (2, 1, '2024-03-02'), (3, 2, '2023-11-20'),
  (4, 3, '2024-07-09'), (5, 4, '2023-05-01');
INSERT INTO order_items VALUES
  (1, 1, 1), (1, 2, 2), (2, 3, 1), (3, 2, 1), (4, 4, 2), (5, 1, 1), (5, 3, 3);
"""

LIBRARY_DDL = """
CREATE TABLE books (
  id INTEGER PRIMARY KEY,
  title TEXT NOT NULL,
  year INTEGER NOT NULL
);
CREATE TABLE members (
  id INTEGER PRIMARY KEY,
  name TEXT NOT NULL
);
CREATE TABLE loans (
  id INTEGER PRIMARY KEY,
  book_id INTEGER NOT NULL,
  member_id INTEGER NOT NULL,
  loan_date TEXT NOT NULL,
  FOREIGN KEY (book_id) REFERENCES books (id),
  FOREIGN KEY (member_id) REFERENCES members (id)
);

INSERT INTO books VALUES
  (1, 'Dune', 1965), (2, 'Neuromancer', 1984), (3, 'The Martian', 2011),
  (4, 'Project Hail Mary', 2021), (5, 'Snow Crash', 1992);
INSERT INTO members VALUES (1, 'Lan'), (2, 'Minh'), (3, 'Quang');
INSERT INTO loans VALUES
  (1, 3, 1, '2024-02-10'), (2, 4, 1, '2024-02-12'), (3, 1, 2, '2024-03-01');
"""


def build_db(path: str | Path, ddl: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    db = Database.connect(str(path), create=True)
    try:
        db.execute_script(ddl)
    finally:
        db.close()
    return path


def build_demo_db(path: str | Path) -> Path:
    """Eight-table shop database with PII-flavored columns; the default
    playground for the CLI and most unit tests."""
    return build_db(path, DEMO_DDL)


# ── mini-suite ─────────────────────────────────────────────────────────────


def _query(sql: str, rationale: str, match: dict | None = None) -> dict[str, Any]:
    step: dict[str, Any] = {
        "response": {
            "kind": "tool_call",
            "tool": "execute_query",
            "arguments": {"sql": sql},
            "rationale": rationale,
        }
    }
    if match:
        step["match"] = match
    return step


def _search(query: str, rationale: str) -> dict[str, Any]:
    return {
        "response": {
            "kind": "tool_call",
            "tool": "request_for_internet_search",
            "arguments": {"query": query},
            "rationale": rationale,
        }
    }


def _answer(text: str, match: dict | None = None) -> dict[str, Any]:
    step: dict[str, Any] = {"response": {"kind": "text", "text": text}}
    if match:
        step["match"] = match
    return step


MINI_SUITE_TASKS: list[dict[str, Any]] = [
    {
        "id": "t01", "db_id": "shop", "hardness": "easy",
        "question": "How many users are there?",
        "query": "SELECT count(*) FROM users",
    },
    {
        "id": "t02", "db_id": "shop", "hardness": "easy",
        "question": "List the names of all products.",
        "query": "SELECT name FROM products",
    },
    {
        "id": "t03", "db_id": "shop", "hardness": "medium",
        "question": "What is the total quantity sold for each product id?",
        "query": "SELECT product_id, sum(quantity) FROM order_items GROUP BY product_id",
    },
    {
        "id": "t04", "db_id": "shop", "hardness": "easy",
        "question": "Which users live in Hanoi?",
        "query": "SELECT name FROM users WHERE city = 'Hanoi'",
    },
    {
        "id": "t05", "db_id": "shop", "hardness": "medium",
        "question": "How many orders were placed during fiscal year 2024?",
        "query": "SELECT count(*) FROM orders WHERE order_date LIKE '2024%'",
        "external_knowledge": (
            "Fiscal year 2024 covers calendar dates 2024-01-01 through 2024-12-31."
        ),
    },
    {
        "id": "t06", "db_id": "shop", "hardness": "medium",
        "question": "List product names from most to least expensive.",
        "query": "SELECT name FROM products ORDER BY price DESC",
    },
    {
        "id": "t07", "db_id": "shop", "hardness": "easy",
        "question": "What is the average product price?",
        "query": "SELECT avg(price) FROM products",
    },
    {
        "id": "t08", "db_id": "library", "hardness": "easy",
        "question": "How many books does the library have?",
        "query": "SELECT count(*) FROM books",
    },
    {
        "id": "t09", "db_id": "library", "hardness": "medium",
        "question": "List titles of books published after 2000.",
        "query": "SELECT title FROM books WHERE year > 2000",
    },
    {
        "id": "t10", "db_id": "library", "hardness": "hard",
        "question": "Which members currently have loans? List their names without duplicates.",
        "query": (
            "SELECT DISTINCT members.name FROM members"
            " JOIN loans ON members.id = loans.member_id"
        ),
    },
]


def mini_suite_scripts() -> dict[str, list[dict[str, Any]]]:
    """Scripted model behavior per task: SQL attempts exactly as the attempt
    histogram expects (six one-shot tasks, three two-attempt repairs, one
    three-attempt repair)."""
    return {
        "t01": [
            _query("select count(*) from users", "Count rows in users."),
            _answer("There are 4 users."),
        ],
        "t02": [
            _query("select name from products", "Project the name column."),
            _answer("Products: Laptop, Mouse, Keyboard, Monitor."),
        ],
        "t03": [
            _query(
                "select product_id, sum(quantity) from order_items group by product_id",
                "Aggregate quantities per product.",
            ),
            _answer("Computed total quantity per product id."),
        ],
        "t04": [
            _query(
                "select name from users where city = 'Hanoi'",
                "Filter users by city.",
            ),
            _answer("An and Chi live in Hanoi."),
        ],
        "t05": [
            _search("fiscal year 2024 definition", "Need the fiscal year bounds."),
            _query(
                "select count(*) from orders where date like '2024%'",
                "Count orders within the fiscal year.",
            ),
            _query(
                "select count(*) from orders where order_date like '2024%'",
                "The column is order_date, not date.",
                match={"prompt_contains": "no such column"},
            ),
            _answer("3 orders were placed in fiscal year 2024."),
        ],
        "t06": [
            _query(
                "select name from products order by prices desc",
                "Sort products by price.",
            ),
            _query(
                "select name from products order by price desc",
                "Fix the column name: price.",
                match={"prompt_contains": "no such column"},
            ),
            _answer("Laptop, Monitor, Keyboard, Mouse."),
        ],
        "t07": [
            _query("select avg(price) from products", "Average over price."),
            _answer("The average product price is 393.625."),
        ],
        "t08": [
            _query("select count(*) from books", "Count the books."),
            _answer("The library has 5 books."),
        ],
        "t09": [
            _query(
                "select titel from books where year > 2000",
                "Filter by publication year.",
            ),
            _query(
                "select title from books where year > 2000",
                "The column is title.",
                match={"prompt_contains": "no such column"},
            ),
            _answer("The Martian and Project Hail Mary."),
        ],
        "t10": [
            _query(
                "select distinct members.name from members"
                " join loans on members.id = loans.members_id",
                "Join members to loans.",
            ),
            _query(
                "select distinct member_name from members"
                " join loans on members.id = loans.member_id",
                "Fix the join column.",
                match={"prompt_contains": "no such column"},
            ),
            _query(
                "select distinct members.name from members"
                " join loans on members.id = loans.member_id",
                "Project members.name.",
            ),
            _answer("Lan and Minh currently have loans."),
        ],
    }


def build_mini_suite(dest: str | Path) -> dict[str, Path]:
    """Materialize the bundled mini-suite under dest: per-database directories
    of SQLite files, a Spider-format tasks.json, and the per-task scripts."""
    dest = Path(dest)
    db_root = dest / "databases"
    build_db(db_root / "shop" / "shop.sqlite", SHOP_DDL)
    build_db(db_root / "library" / "library.sqlite", LIBRARY_DDL)
    task_file = dest / "tasks.json"
    task_file.write_text(
        json.dumps(MINI_SUITE_TASKS, indent=2) + "\n", encoding="utf-8"
    )
    script_file = dest / "scripts.json"
    script_file.write_text(
        json.dumps({"tasks": mini_suite_scripts()}, indent=2) + "\n",
        encoding="utf-8",
    )
    return {"db_root": db_root, "task_file": task_file, "script_file": script_file}


def scripted_runtime_factory(
    scripts: dict[str, list[dict[str, Any]]],
    config: EngineConfig | None = None,
):
    """Runtime factory for run_suite: each task gets a fresh ScriptedBackend
    over its own canned steps."""

    def factory(task: EvalTask, database: Database) -> AgentRuntime:
        steps = scripts.get(task.id)
        if steps is None:
            raise KeyError(f"no script for task {task.id}")
        backend = ScriptedBackend.from_steps(steps)
        return make_runtime(database, backend, config=config)

    return factory


def load_script_file(path: str | Path) -> dict[str, list[dict[str, Any]]]:
    """Read a script file: either a bare list (one conversation) or
    {"tasks": {task_id: [steps]}} for per-task suites."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, list):
        return {"*": data}
    if isinstance(data, dict) and isinstance(data.get("tasks"), dict):
        return dict(data["tasks"])
    raise ValueError(f"unrecognized script file format: {path}")
