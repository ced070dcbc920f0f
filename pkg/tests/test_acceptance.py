"""Acceptance criteria, one test per criterion, each printing a PASS line and
enforcing its runtime budget. Run with `pytest tests/test_acceptance.py -v -s`."""

from __future__ import annotations

import random
import time
from contextlib import contextmanager

import pytest
from conftest import new_session, scripted_engine
from corpus import CORPUS, DESTRUCTIVE, STAR_SELECTS, STATE_MODIFYING
from oracles import oracle_equivalent, random_pair

from dbcopilot.dbadapter import Database, RowSet
from dbcopilot.engine import EngineConfig, ReactEngine, make_runtime
from dbcopilot.evalharness import (
    EvalRecord,
    build_report,
    load_spider_tasks,
    result_sets_equivalent,
    run_suite,
)
from dbcopilot.fixtures import (
    build_demo_db,
    build_mini_suite,
    mini_suite_scripts,
    scripted_runtime_factory,
)
from dbcopilot.llm import ScriptedBackend
from dbcopilot.schemaindex import HashedTrigramProvider, build_index, search_tables_by_name
from dbcopilot.session import (
    SessionStatus,
    TurnCountingPolicy,
    TurnKind,
    count_interaction_turns,
    serialize_session,
)


@contextmanager
def budget(name: str, seconds: float):
    started = time.perf_counter()
    yield
    elapsed = time.perf_counter() - started
    assert elapsed < seconds, f"{name} took {elapsed:.2f}s (budget {seconds}s)"
    print(f"ACCEPTANCE PASS: {name} ({elapsed:.2f}s)")


def _records(level, n_tasks, n_runs, correct_records, attempts_sum):
    total = n_tasks * n_runs
    attempts = [1] * total
    extra = attempts_sum - total
    i = 0
    while extra > 0:
        attempts[i % total] += 1
        extra -= 1
        i += 1
    return [
        EvalRecord(
            task_id=f"{level}-{k % n_tasks:03d}",
            hardness=level,
            correct=k < correct_records,
            sql_attempts=attempts[k],
        )
        for k in range(total)
    ]


def test_metric_arithmetic_fidelity():
    """Synthetic records matching the published per-hardness rows aggregate
    to overall accuracy 89.8% +/- 0.1 and average retrieval 1.45 +/- 0.01."""
    with budget("metric arithmetic fidelity", 1.0):
        records = (
            _records("easy", 16, 3, 48, 64)
            + _records("medium", 31, 3, 93, 131)
            + _records("hard", 19, 3, 46, 90)
            + _records("extra_hard", 32, 3, 77, 141)
        )
        report = build_report(records, n_runs=3)
        assert report.overall.total == 98
        assert abs(report.overall.accuracy - 0.898) <= 0.001
        assert abs(report.overall.avg_retrieval - 1.45) <= 0.01
        assert round(report.rows["easy"].avg_retrieval, 2) == 1.33
        assert abs(report.rows["hard"].correct - 15.33) <= 0.01
        assert abs(report.rows["extra_hard"].correct - 25.67) <= 0.01


def test_safety_gate_soundness(tmp_path):
    """Across the corpus: destructive statements execute only after exactly
    two approvals, other state-modifying statements after exactly one, and
    the audit hook observes zero unauthorized executions."""
    with budget("safety gate soundness", 5.0):
        assert len(CORPUS) >= 50
        assert STATE_MODIFYING and DESTRUCTIVE
        for i, item in enumerate(STATE_MODIFYING):
            path = build_demo_db(tmp_path / f"gate{i}.sqlite")
            db = Database.connect(str(path))
            audit: list[tuple] = []
            try:
                backend = ScriptedBackend.from_steps(
                    [
                        {
                            "response": {
                                "kind": "tool_call",
                                "tool": "execute_non_query",
                                "arguments": {"sql": item.sql},
                            }
                        },
                        {"response": {"kind": "text", "text": "done"}},
                    ]
                )
                runtime = make_runtime(
                    db, backend, audit_hook=lambda s, f, t: audit.append((s, t))
                )
                engine = ReactEngine(runtime)
                session = engine.run_turn(new_session(session_id=f"gate-{i}"), "run it")

                required = 2 if item.destructive else 1
                plan = engine.pending_plan(session)
                assert session.status is SessionStatus.AWAITING_CONFIRMATION
                assert plan is not None
                assert plan.confirmations_required == required
                assert audit == [], f"executed before approval: {item.sql}"

                if required == 2:
                    engine.resume_with_confirmation(session, "yes")
                    assert session.status is SessionStatus.AWAITING_CONFIRMATION
                    assert audit == [], f"executed after one approval: {item.sql}"
                engine.resume_with_confirmation(session, "yes, proceed")
                assert len(audit) == 1, f"unexpected execution count: {item.sql}"
                assert audit[0][1] is not None, f"token missing: {item.sql}"
            finally:
                db.close()


def test_auto_debug_loop(demo_db):
    """A wrong-column query is repaired within three attempts and the answer
    matches the gold result; an always-failing script stops after exactly
    max_debug_retries repairs and reports the last engine error."""
    with budget("auto-debug loop", 5.0):
        engine = scripted_engine(
            demo_db,
            [
                {"response": {"kind": "tool_call", "tool": "execute_query",
                              "arguments": {"sql": "SELECT nam FROM users"}}},
                {"match": {"prompt_contains": "no such column"},
                 "response": {"kind": "tool_call", "tool": "execute_query",
                              "arguments": {"sql": "SELECT name FROM users"}}},
                {"response": {"kind": "text", "text": "Here are the names."}},
            ],
        )
        session = engine.run_turn(new_session(), "list the user names")
        attempts = count_interaction_turns(
            session, TurnCountingPolicy.SQL_EXECUTION_ATTEMPTS
        )
        assert attempts <= 3
        predicted = RowSet.from_dict(session.turns[-1].payload["result"])
        gold = demo_db.run_select("SELECT name FROM users")
        assert result_sets_equivalent(predicted, gold)

        retries = 3
        failing = [
            {"response": {"kind": "tool_call", "tool": "execute_query",
                          "arguments": {"sql": f"SELECT broken{i} FROM users"}}}
            for i in range(1, retries + 2)
        ]
        engine = scripted_engine(
            demo_db, failing, config=EngineConfig(max_debug_retries=retries)
        )
        session = engine.run_turn(new_session(), "list the user names")
        attempts = count_interaction_turns(
            session, TurnCountingPolicy.SQL_EXECUTION_ATTEMPTS
        )
        assert attempts == retries + 1  # the initial attempt plus its repairs
        final = session.turns[-1].payload
        assert final.get("failure") is True
        assert f"broken{retries + 1}" in final["error"]
        assert final["error"] in final["text"]


def test_end_to_end_mini_suite(tmp_path):
    """The bundled 10-task suite over fixture databases with the scripted
    backend: accuracy 10/10, per-task attempts exactly as scripted, report
    and histogram files emitted."""
    with budget("end-to-end mini-suite", 30.0):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        out_dir = tmp_path / "out"
        report = run_suite(
            tasks,
            paths["db_root"],
            scripted_runtime_factory(mini_suite_scripts()),
            out_dir=out_dir,
        )
        assert report.overall.total == 10
        assert report.overall.correct == 10
        assert report.overall.accuracy == 1.0
        scripted_attempts = {
            "t01": 1, "t02": 1, "t03": 1, "t04": 1, "t05": 2,
            "t06": 2, "t07": 1, "t08": 1, "t09": 2, "t10": 3,
        }
        assert {r.task_id: r.sql_attempts for r in report.records} == scripted_attempts
        for name in ("report.json", "report.txt", "histogram.csv"):
            assert (out_dir / name).exists(), name


def test_equivalence_oracle():
    """result_sets_equivalent agrees with the brute-force canonical-form
    comparator on 1000 randomized pairs (rows <= 6, cols <= 4)."""
    with budget("equivalence oracle", 10.0):
        rng = random.Random(987654321)
        disagreements = 0
        for _ in range(1000):
            predicted, gold = random_pair(rng)
            order_sensitive = rng.random() < 0.3
            ours = result_sets_equivalent(
                predicted, gold, order_sensitive=order_sensitive, float_tol=1e-9
            )
            if ours != oracle_equivalent(predicted, gold, order_sensitive):
                disagreements += 1
        assert disagreements == 0


WORD_POOL = [
    "users", "orders", "products", "customers", "invoices", "payments",
    "sessions", "accounts", "shipments", "reviews", "employees", "logs",
    "tickets", "vendors", "regions", "plans",
]


def test_schema_search_properties():
    """Exact-name queries rank their table first on 100 randomized fixtures;
    scores stay in [-1, 1]; insertion order never changes results."""
    with budget("schema search properties", 5.0):
        provider = HashedTrigramProvider()
        rng = random.Random(424242)
        for trial in range(100):
            n = rng.randint(2, 10)
            names = [
                f"{rng.choice(WORD_POOL)}_{rng.randint(0, 999):03d}"
                for _ in range(n)
            ]
            names = list(dict.fromkeys(names))
            index = build_index(names, provider)

            target = rng.choice(names)
            cased = "".join(c.upper() if rng.random() < 0.5 else c for c in target)
            results = search_tables_by_name(index, cased, k=len(names))
            assert results[0].table == target, (trial, cased, results)
            assert all(-1.0 <= c.score <= 1.0 for c in results)

            shuffled = list(names)
            rng.shuffle(shuffled)
            permuted = search_tables_by_name(
                build_index(shuffled, provider), cased, k=len(names)
            )
            assert [(c.table, round(c.score, 12)) for c in results] == [
                (c.table, round(c.score, 12)) for c in permuted
            ]


def test_trajectory_reproducibility(tmp_path):
    """Two runs of the same scripted scenario serialize identically once
    timestamps are excluded."""
    with budget("trajectory reproducibility", 5.0):
        steps = [
            {"response": {"kind": "tool_call", "tool": "search_tables_by_name",
                          "arguments": {"query": "orders"},
                          "rationale": "Find the orders table."}},
            {"response": {"kind": "tool_call", "tool": "execute_query",
                          "arguments": {"sql": "SELECT count(*) FROM orders"}}},
            {"response": {"kind": "text", "text": "There are 5 orders."}},
        ]

        def run(name: str) -> str:
            path = build_demo_db(tmp_path / f"{name}.sqlite")
            db = Database.connect(str(path))
            try:
                engine = scripted_engine(db, steps)
                session = engine.run_turn(
                    new_session(session_id="repro"), "how many orders are there?"
                )
                return serialize_session(session, include_timestamps=False)
            finally:
                db.close()

        assert run("first") == run("second")


def test_star_select_interception(tmp_path):
    """Every star-projection select in the corpus is intercepted, never
    executed, and the interception message lists the table's actual columns."""
    with budget("star-select interception", 2.0):
        assert STAR_SELECTS
        for i, item in enumerate(STAR_SELECTS):
            path = build_demo_db(tmp_path / f"star{i}.sqlite")
            db = Database.connect(str(path))
            try:
                before = db.dump()
                engine = scripted_engine(
                    db,
                    [{"response": {"kind": "tool_call", "tool": "execute_query",
                                   "arguments": {"sql": item.sql}}}],
                )
                session = engine.run_turn(new_session(session_id=f"star-{i}"), "show me everything")
                assert TurnKind.TOOL_CALL not in [t.kind for t in session.turns]
                final = session.turns[-1].payload
                interception = final.get("interception")
                assert interception, f"not intercepted: {item.sql}"
                table = interception["table"]
                actual_columns = db.get_table_schema(table).column_names()
                assert interception["columns"] == actual_columns
                for column in actual_columns:
                    assert column in final["text"]
                assert db.dump() == before, f"state changed: {item.sql}"
            finally:
                db.close()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
