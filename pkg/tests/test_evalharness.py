from __future__ import annotations

import json
import random

import pytest
from oracles import oracle_equivalent, random_pair

from dbcopilot.dbadapter import Database, RowSet
from dbcopilot.errors import FormatError, MissingDatabase
from dbcopilot.evalharness import (
    EvalRecord,
    build_report,
    gold_is_order_sensitive,
    histogram_csv,
    load_spider_tasks,
    render_report_table,
    report_to_dict,
    result_sets_equivalent,
    run_suite,
)
from dbcopilot.fixtures import (
    build_mini_suite,
    mini_suite_scripts,
    scripted_runtime_factory,
)


def rs(rows, cols=None):
    if cols is None:
        cols = [f"c{i}" for i in range(len(rows[0]) if rows else 1)]
    return RowSet(column_names=cols, rows=[tuple(r) for r in rows])


class TestResultSetEquivalence:
    def test_order_insensitive_multiset(self):
        assert result_sets_equivalent(
            rs([(1, "a"), (2, "b")]), rs([(2, "b"), (1, "a")])
        )

    def test_float_tolerance(self):
        assert result_sets_equivalent(rs([(1.0000001,)]), rs([(1.0,)]), float_tol=1e-6)
        assert not result_sets_equivalent(rs([(1.01,)]), rs([(1.0,)]), float_tol=1e-6)

    def test_multiset_cardinality(self):
        assert not result_sets_equivalent(rs([(1,), (1,)]), rs([(1,)]))

    def test_order_sensitive_reversed_rows(self):
        # frozen from the sequence-comparison oracle: reversal must fail
        predicted = rs([(3,), (2,), (1,)])
        gold = rs([(1,), (2,), (3,)])
        assert oracle_equivalent(predicted, gold, order_sensitive=True) is False
        assert not result_sets_equivalent(predicted, gold, order_sensitive=True)
        assert result_sets_equivalent(predicted, gold, order_sensitive=False)

    def test_column_permutation_ignored(self):
        assert result_sets_equivalent(
            rs([("a", 1), ("b", 2)]), rs([(1, "a"), (2, "b")])
        )

    def test_column_names_ignored(self):
        assert result_sets_equivalent(
            rs([(1,)], cols=["anything"]), rs([(1,)], cols=["count(*)"])
        )

    def test_arity_mismatch_is_not_equivalent(self):
        assert not result_sets_equivalent(rs([(1, 2)]), rs([(1,)]))

    def test_null_equals_null(self):
        assert result_sets_equivalent(rs([(None,)]), rs([(None,)]))
        assert not result_sets_equivalent(rs([(None,)]), rs([(0,)]))

    def test_int_float_interchangeable(self):
        assert result_sets_equivalent(rs([(1,)]), rs([(1.0,)]))

    def test_wide_rowsets_refused(self):
        wide = rs([tuple(range(9))], cols=[f"c{i}" for i in range(9)])
        assert not result_sets_equivalent(wide, wide)

    def test_truncated_first_rejected(self):
        left = rs([(1,)])
        left.truncated = True
        with pytest.raises(ValueError):
            result_sets_equivalent(left, rs([(1,)]))

    def test_oracle_agreement_on_randomized_pairs(self):
        rng = random.Random(20240810)
        disagreements = []
        for i in range(1000):
            predicted, gold = random_pair(rng)
            order_sensitive = rng.random() < 0.3
            ours = result_sets_equivalent(
                predicted, gold, order_sensitive=order_sensitive, float_tol=1e-9
            )
            oracle = oracle_equivalent(predicted, gold, order_sensitive)
            if ours != oracle:
                disagreements.append((i, predicted, gold, order_sensitive))
        assert disagreements == []


class TestOrderSensitivity:
    def test_top_level_order_by_detected(self):
        assert gold_is_order_sensitive("SELECT name FROM t ORDER BY name")

    def test_nested_order_by_ignored(self):
        assert not gold_is_order_sensitive(
            "SELECT * FROM (SELECT name FROM t ORDER BY name LIMIT 3)"
        )

    def test_plain_select(self):
        assert not gold_is_order_sensitive("SELECT name FROM t")


class TestLoadSpiderTasks:
    def _suite(self, tmp_path):
        return build_mini_suite(tmp_path / "suite")

    def test_well_formed_file(self, tmp_path):
        paths = self._suite(tmp_path)
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        assert len(tasks) == 10
        assert tasks[0].question
        assert tasks[0].gold_sql.upper().startswith("SELECT")

    def test_hardness_propagated(self, tmp_path):
        paths = self._suite(tmp_path)
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        by_id = {t.id: t.hardness for t in tasks}
        assert by_id["t01"] == "easy"
        assert by_id["t10"] == "hard"

    def test_missing_database_named(self, tmp_path):
        paths = self._suite(tmp_path)
        tasks = json.loads(paths["task_file"].read_text())
        tasks.append(
            {"id": "tx", "db_id": "absent_db", "question": "?", "query": "SELECT 1"}
        )
        bad_file = tmp_path / "bad.json"
        bad_file.write_text(json.dumps(tasks))
        with pytest.raises(MissingDatabase) as excinfo:
            load_spider_tasks(bad_file, paths["db_root"])
        assert excinfo.value.db_ids == ["absent_db"]

    def test_missing_field_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps([{"db_id": "shop", "query": "SELECT 1"}]))
        with pytest.raises(FormatError) as excinfo:
            load_spider_tasks(bad, tmp_path)
        assert "question" in str(excinfo.value)

    def test_not_json_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        with pytest.raises(FormatError):
            load_spider_tasks(bad, tmp_path)

    def test_external_knowledge_loaded(self, tmp_path):
        paths = self._suite(tmp_path)
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        t05 = next(t for t in tasks if t.id == "t05")
        assert t05.external_knowledge is not None


class TestRunSuite:
    def test_mini_suite_all_correct(self, tmp_path):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        report = run_suite(
            tasks,
            paths["db_root"],
            scripted_runtime_factory(mini_suite_scripts()),
            out_dir=tmp_path / "out",
        )
        assert report.overall.total == 10
        assert report.overall.accuracy == 1.0
        errors = [r.error for r in report.records if r.error]
        assert errors == []
        attempts = {r.task_id: r.sql_attempts for r in report.records}
        assert attempts == {
            "t01": 1, "t02": 1, "t03": 1, "t04": 1, "t05": 2,
            "t06": 2, "t07": 1, "t08": 1, "t09": 2, "t10": 3,
        }
        assert report.histogram == {1: 6, 2: 3, 3: 1}
        for name in ("report.json", "report.txt", "histogram.csv"):
            assert (tmp_path / "out" / name).exists()
        assert (tmp_path / "out" / "trajectories" / "t01.json").exists()

    def test_gold_never_enters_prompts(self, tmp_path):
        from dbcopilot.llm import RecordingBackend, ScriptedBackend
        from dbcopilot.engine import make_runtime

        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        scripts = mini_suite_scripts()
        recorders: dict[str, RecordingBackend] = {}

        def factory(task, database):
            backend = RecordingBackend(ScriptedBackend.from_steps(scripts[task.id]))
            recorders[task.id] = backend
            return make_runtime(database, backend)

        run_suite(tasks, paths["db_root"], factory)
        for task in tasks:
            for request in recorders[task.id].requests:
                assert task.gold_sql not in request.prompt

    def test_interaction_turns_exclude_standard_approvals(self, tmp_path):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        report = run_suite(
            tasks, paths["db_root"], scripted_runtime_factory(mini_suite_scripts())
        )
        for record in report.records:
            assert record.interaction_turns[
                "user_messages_excluding_standardized_approvals"
            ] == 1

    def test_task_failures_recorded_not_fatal(self, tmp_path):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])[:2]
        scripts = {
            "t01": mini_suite_scripts()["t01"],
            "t02": [],  # empty script -> ScriptExhausted inside the engine
        }
        report = run_suite(
            tasks, paths["db_root"], scripted_runtime_factory(scripts)
        )
        by_id = {r.task_id: r for r in report.records}
        assert by_id["t01"].correct
        assert not by_id["t02"].correct
        assert by_id["t02"].error is not None

    def test_missing_db_aborts_suite(self, tmp_path):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        tasks[0].db_id = "gone"
        with pytest.raises(MissingDatabase):
            run_suite(tasks, paths["db_root"], scripted_runtime_factory({}))

    def test_parallel_workers_match_serial(self, tmp_path):
        paths = build_mini_suite(tmp_path / "suite")
        tasks = load_spider_tasks(paths["task_file"], paths["db_root"])
        serial = run_suite(
            tasks, paths["db_root"], scripted_runtime_factory(mini_suite_scripts())
        )
        parallel = run_suite(
            tasks,
            paths["db_root"],
            scripted_runtime_factory(mini_suite_scripts()),
            workers=4,
        )
        assert {(r.task_id, r.correct, r.sql_attempts) for r in serial.records} == {
            (r.task_id, r.correct, r.sql_attempts) for r in parallel.records
        }


def _synthetic_records(level: str, n_tasks: int, n_runs: int,
                       correct_records: int, attempts_sum: int) -> list[EvalRecord]:
    """Records whose per-level aggregates hit the requested totals exactly."""
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


class TestReportArithmetic:
    def test_published_spider_subset_aggregates(self):
        # 98 questions (16/31/19/32), three runs each; correct-record counts
        # and attempt sums chosen so per-level means print as the published
        # row values (16, 31, 15.33, 25.67 correct; 1.33/1.41/1.57/1.47).
        records = (
            _synthetic_records("easy", 16, 3, 48, 64)
            + _synthetic_records("medium", 31, 3, 93, 131)
            + _synthetic_records("hard", 19, 3, 46, 90)
            + _synthetic_records("extra_hard", 32, 3, 77, 141)
        )
        report = build_report(records, n_runs=3)
        assert report.overall.total == 98
        assert report.overall.correct == pytest.approx(88.0, abs=1e-9)
        assert report.overall.accuracy == pytest.approx(0.898, abs=0.001)
        assert report.overall.avg_retrieval == pytest.approx(1.45, abs=0.01)
        assert report.rows["hard"].correct == pytest.approx(15.33, abs=0.01)
        assert report.rows["hard"].accuracy == pytest.approx(0.807, abs=0.001)
        assert report.rows["extra_hard"].correct == pytest.approx(25.67, abs=0.01)
        assert report.rows["extra_hard"].accuracy == pytest.approx(0.802, abs=0.001)

    def test_rows_sum_to_overall(self):
        records = _synthetic_records("easy", 4, 1, 3, 6) + _synthetic_records(
            "hard", 2, 1, 1, 4
        )
        report = build_report(records)
        assert report.overall.total == sum(r.total for r in report.rows.values())
        assert 0.0 <= report.overall.accuracy <= 1.0
        assert sum(report.histogram.values()) == len(records)

    def test_histogram_bins(self):
        records = [
            EvalRecord(task_id=f"t{i}", hardness="easy", correct=True, sql_attempts=a)
            for i, a in enumerate([1, 1, 2, 3])
        ]
        report = build_report(records)
        assert report.histogram == {1: 2, 2: 1, 3: 1}

    def test_render_contains_definition_and_rows(self):
        records = _synthetic_records("easy", 2, 1, 2, 3)
        text = render_report_table(build_report(records))
        assert "Avg retrieval" in text
        assert "mean SQL execution attempts" in text
        assert "easy" in text and "all" in text

    def test_histogram_csv_format(self):
        records = [
            EvalRecord(task_id=f"t{i}", hardness="easy", correct=True, sql_attempts=a)
            for i, a in enumerate([1, 2, 2])
        ]
        csv = histogram_csv(build_report(records))
        assert csv.splitlines() == ["attempts,count", "1,1", "2,2"]

    def test_report_json_round_trips(self):
        records = _synthetic_records("medium", 3, 1, 2, 5)
        data = report_to_dict(build_report(records))
        assert json.loads(json.dumps(data)) == data
        assert data["overall"]["total"] == 3
