"""Benchmark harness: zero-shot autonomous runs over Spider-format task
suites, execution-accuracy scoring, and interaction-efficiency reporting.

The protocol simulates a non-technical user: the agent starts from the bare
natural-language question (no schema hints, never the gold SQL), confirmation
requests get a standardized approval, and any external knowledge a task needs
is preloaded into the search stub without counting as an interaction turn.
"""

from __future__ import annotations

import json
import logging
import shutil
import tempfile
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from pathlib import Path
from typing import Any, Callable, Sequence

from .dbadapter import Database, RowSet
from .engine import AgentRuntime, ReactEngine
from .errors import DbError, FormatError, MissingDatabase, SuiteConfigError
from .session import (
    Session,
    SessionStatus,
    TurnCountingPolicy,
    TurnKind,
    count_interaction_turns,
    serialize_session,
)
from .sqlanalyzer import _tokenize  # tokenizer reused for ORDER BY detection

logger = logging.getLogger(__name__)

HARDNESS_LEVELS = ("easy", "medium", "hard", "extra_hard", "unknown")

# Column-permutation matching is exhaustive up to this arity and refused
# beyond it (result sets that wide are out of scope for Spider-style golds).
MAX_PERMUTATION_COLUMNS = 8

EVAL_ROW_LIMIT = 100_000


@dataclass
class EvalTask:
    id: str
    db_id: str
    question: str
    gold_sql: str
    hardness: str = "unknown"
    external_knowledge: str | None = None


@dataclass
class EvalRecord:
    task_id: str
    hardness: str
    correct: bool
    sql_attempts: int
    interaction_turns: dict[str, int] = field(default_factory=dict)
    predicted_sql: str | None = None
    wall_time: float = 0.0
    trajectory_ref: str | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "hardness": self.hardness,
            "correct": self.correct,
            "sql_attempts": self.sql_attempts,
            "interaction_turns": dict(self.interaction_turns),
            "predicted_sql": self.predicted_sql,
            "wall_time": self.wall_time,
            "trajectory_ref": self.trajectory_ref,
            "error": self.error,
        }


@dataclass
class ReportRow:
    total: float
    correct: float
    accuracy: float
    avg_retrieval: float


@dataclass
class EvalReport:
    rows: dict[str, ReportRow]
    overall: ReportRow
    histogram: dict[int, int]
    n_runs: int = 1
    records: list[EvalRecord] = field(default_factory=list)


# ── result-set equivalence ─────────────────────────────────────────────────


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _cell_equal(a: Any, b: Any, tol: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if _is_number(a) and _is_number(b):
        fa, fb = float(a), float(b)
        if fa != fa or fb != fb:  # NaN
            return fa != fa and fb != fb
        if fa == fb:
            return True
        return abs(fa - fb) <= tol
    if type(a) is not type(b):
        return False
    return a == b


def _row_equal(a: Sequence[Any], b: Sequence[Any], tol: float) -> bool:
    return all(_cell_equal(x, y, tol) for x, y in zip(a, b))


def _canon_cell(value: Any) -> tuple:
    if value is None:
        return ("null",)
    if _is_number(value):
        f = float(value)
        if f != f:
            return ("nan",)
        if f in (float("inf"), float("-inf")):
            return ("inf", f > 0)
        return ("num", Fraction(value))
    if isinstance(value, bytes):
        return ("bytes", value)
    return ("str", str(value))


def _canon_row(row: Sequence[Any]) -> tuple:
    return tuple(_canon_cell(c) for c in row)


def _rows_match(
    pred: list[tuple], gold: list[tuple], order_sensitive: bool, tol: float
) -> bool:
    if order_sensitive:
        return all(_row_equal(p, g, tol) for p, g in zip(pred, gold))
    if Counter(map(_canon_row, pred)) == Counter(map(_canon_row, gold)):
        return True
    if tol <= 0:
        return False
    remaining = list(gold)
    for row in pred:
        for j, other in enumerate(remaining):
            if _row_equal(row, other, tol):
                remaining.pop(j)
                break
        else:
            return False
    return True


def result_sets_equivalent(
    predicted: RowSet,
    gold: RowSet,
    order_sensitive: bool = False,
    float_tol: float = 1e-6,
) -> bool:
    """Execution-accuracy comparison: row multisets must match (sequences
    when the gold query orders its output), column names are ignored, column
    order is ignored via best-permutation matching, and numeric cells compare
    within float_tol. Arity mismatches are simply not equivalent."""
    if predicted.truncated or gold.truncated:
        raise ValueError("truncated row sets cannot be compared")
    ncols = len(predicted.column_names)
    if ncols != len(gold.column_names):
        return False
    if len(predicted.rows) != len(gold.rows):
        return False
    if ncols == 0 or not gold.rows:
        return True
    if ncols > MAX_PERMUTATION_COLUMNS:
        logger.warning(
            "refusing permutation search over %d columns (limit %d)",
            ncols,
            MAX_PERMUTATION_COLUMNS,
        )
        return False
    for perm in permutations(range(ncols)):
        permuted = [tuple(row[i] for i in perm) for row in predicted.rows]
        if _rows_match(permuted, list(gold.rows), order_sensitive, float_tol):
            return True
    return False


def gold_is_order_sensitive(sql: str) -> bool:
    """True when the gold query has a top-level ORDER BY."""
    try:
        tokens = _tokenize(sql)
    except Exception:
        return False
    for i, tok in enumerate(tokens[:-1]):
        nxt = tokens[i + 1]
        if (
            tok.type == "word"
            and tok.value.upper() == "ORDER"
            and tok.depth == 0
            and nxt.type == "word"
            and nxt.value.upper() == "BY"
        ):
            return True
    return False


# ── task files ─────────────────────────────────────────────────────────────


def spider_db_path(db_root: str | Path, db_id: str) -> Path:
    return Path(db_root) / db_id / f"{db_id}.sqlite"


def load_spider_tasks(task_file: str | Path, db_root: str | Path) -> list[EvalTask]:
    """Read a Spider-format JSON task file (question, db_id, query) and
    confirm every referenced database exists under db_root."""
    try:
        data = json.loads(Path(task_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read task file {task_file}: {exc}") from exc
    if not isinstance(data, list):
        raise FormatError("task file must hold a JSON list of tasks")

    tasks: list[EvalTask] = []
    missing: set[str] = set()
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise FormatError(f"task {i} is not an object")
        for key in ("question", "db_id", "query"):
            if key not in item:
                raise FormatError(f"task {i} is missing required field {key!r}")
        hardness = str(item.get("hardness") or item.get("difficulty") or "unknown")
        if hardness == "extra":
            hardness = "extra_hard"
        if hardness not in HARDNESS_LEVELS:
            hardness = "unknown"
        task = EvalTask(
            id=str(item.get("id", f"task-{i:03d}")),
            db_id=str(item["db_id"]),
            question=str(item["question"]),
            gold_sql=str(item["query"]),
            hardness=hardness,
            external_knowledge=item.get("external_knowledge"),
        )
        if not spider_db_path(db_root, task.db_id).exists():
            missing.add(task.db_id)
        tasks.append(task)
    if missing:
        raise MissingDatabase(sorted(missing))
    return tasks


# ── suite runner ───────────────────────────────────────────────────────────


@dataclass
class SimulatedUser:
    """The zero-shot protocol's stand-in for a non-technical user: answers
    every confirmation request with one standardized approval."""

    approval: str = "yes, proceed"
    max_exchanges: int = 8


RuntimeFactory = Callable[[EvalTask, Database], AgentRuntime]


def run_suite(
    tasks: Sequence[EvalTask],
    db_root: str | Path,
    runtime_factory: RuntimeFactory,
    *,
    user: SimulatedUser | None = None,
    n_runs: int = 1,
    float_tol: float = 1e-6,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> EvalReport:
    """Run every task n_runs times on fresh database copies and aggregate
    execution accuracy and retrieval counts. Individual task failures are
    recorded, never fatal."""
    user = user or SimulatedUser()
    missing = sorted({t.db_id for t in tasks if not spider_db_path(db_root, t.db_id).exists()})
    if missing:
        raise MissingDatabase(missing)
    if n_runs < 1:
        raise SuiteConfigError("n_runs must be >= 1")

    trajectory_dir: Path | None = None
    if out_dir is not None:
        trajectory_dir = Path(out_dir) / "trajectories"
        trajectory_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(task, run) for task in tasks for run in range(n_runs)]

    def _one(job: tuple[EvalTask, int]) -> EvalRecord:
        task, run = job
        return _run_task(
            task, run, db_root, runtime_factory, user, n_runs, float_tol, trajectory_dir
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, jobs))
    else:
        records = [_one(job) for job in jobs]

    report = build_report(records, n_runs=n_runs)
    if out_dir is not None:
        write_report_files(report, out_dir)
    return report


def _run_task(
    task: EvalTask,
    run: int,
    db_root: str | Path,
    runtime_factory: RuntimeFactory,
    user: SimulatedUser,
    n_runs: int,
    float_tol: float,
    trajectory_dir: Path | None,
) -> EvalRecord:
    source = spider_db_path(db_root, task.db_id)
    record_id = task.id if n_runs == 1 else f"{task.id}-r{run + 1}"
    with tempfile.TemporaryDirectory(prefix="dbcopilot-eval-") as tmp:
        agent_db_path = Path(tmp) / "agent.sqlite"
        gold_db_path = Path(tmp) / "gold.sqlite"
        shutil.copyfile(source, agent_db_path)
        shutil.copyfile(source, gold_db_path)

        database = Database.connect(str(agent_db_path))
        session = Session(id=record_id, db_ref=task.db_id)
        started = time.perf_counter()
        error: str | None = None
        try:
            runtime = runtime_factory(task, database)
            if task.external_knowledge:
                runtime.registry.search.preload([task.external_knowledge])
            engine = ReactEngine(runtime)
            engine.run_turn(session, task.question)
            exchanges = 0
            while (
                session.status is SessionStatus.AWAITING_CONFIRMATION
                and exchanges < user.max_exchanges
            ):
                engine.resume_with_confirmation(session, user.approval)
                exchanges += 1
        except Exception as exc:  # suite must survive individual failures
            error = f"{type(exc).__name__}: {exc}"
            logger.warning("task %s run %d failed: %s", task.id, run + 1, error)
        finally:
            database.close()
        wall = time.perf_counter() - started

        predicted_sql, predicted_rows = _extract_prediction(session)
        correct = False
        if error is None and predicted_rows is not None and not predicted_rows.truncated:
            gold_db = Database.connect(str(gold_db_path))
            try:
                gold_rows = gold_db.run_select(task.gold_sql, row_limit=EVAL_ROW_LIMIT)
                correct = result_sets_equivalent(
                    predicted_rows,
                    gold_rows,
                    order_sensitive=gold_is_order_sensitive(task.gold_sql),
                    float_tol=float_tol,
                )
            except DbError as exc:
                error = f"gold query failed: {exc}"
            finally:
                gold_db.close()

        trajectory_ref: str | None = None
        if trajectory_dir is not None:
            path = trajectory_dir / f"{record_id}.json"
            path.write_text(serialize_session(session), encoding="utf-8")
            trajectory_ref = str(path)

        interaction = {}
        if any(t.kind is TurnKind.USER_MESSAGE for t in session.turns):
            interaction = {
                policy.value: count_interaction_turns(session, policy)
                for policy in TurnCountingPolicy
            }
        return EvalRecord(
            task_id=task.id,
            hardness=task.hardness,
            correct=correct,
            sql_attempts=interaction.get(
                TurnCountingPolicy.SQL_EXECUTION_ATTEMPTS.value, 0
            ),
            interaction_turns=interaction,
            predicted_sql=predicted_sql,
            wall_time=wall,
            trajectory_ref=trajectory_ref,
            error=error,
        )


def _extract_prediction(session: Session) -> tuple[str | None, RowSet | None]:
    for turn in reversed(session.turns):
        if turn.kind is not TurnKind.FINAL_ANSWER:
            continue
        sql = turn.payload.get("sql")
        result = turn.payload.get("result")
        if sql and isinstance(result, dict):
            return str(sql), RowSet.from_dict(result)
        return (str(sql) if sql else None), None
    return None, None


# ── aggregation and rendering ──────────────────────────────────────────────


def build_report(records: Sequence[EvalRecord], n_runs: int = 1) -> EvalReport:
    """Aggregate records per hardness. With n_runs > 1 the correct counts are
    per-run means, which is where fractional correct answers come from."""

    def _row(group: Sequence[EvalRecord]) -> ReportRow:
        total = len({r.task_id for r in group})
        correct = sum(1 for r in group if r.correct) / n_runs
        attempts = [r.sql_attempts for r in group]
        return ReportRow(
            total=total,
            correct=correct,
            accuracy=correct / total if total else 0.0,
            avg_retrieval=sum(attempts) / len(attempts) if attempts else 0.0,
        )

    rows: dict[str, ReportRow] = {}
    for level in HARDNESS_LEVELS:
        group = [r for r in records if r.hardness == level]
        if group:
            rows[level] = _row(group)
    overall = _row(list(records)) if records else ReportRow(0, 0.0, 0.0, 0.0)
    histogram = dict(sorted(Counter(r.sql_attempts for r in records).items()))
    return EvalReport(
        rows=rows,
        overall=overall,
        histogram=histogram,
        n_runs=n_runs,
        records=list(records),
    )


RETRIEVAL_DEFINITION = (
    "Average retrieval = mean SQL execution attempts per question "
    "(execute_query/execute_non_query tool calls)."
)


def render_report_table(report: EvalReport) -> str:
    headers = ["Hardness", "Total", "Correct", "Avg retrieval", "Accuracy"]
    body: list[list[str]] = []
    for level, row in report.rows.items():
        body.append(_format_row(level, row))
    body.append(_format_row("all", report.overall))
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in body)) for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(r)) for r in body]
    lines.append("")
    lines.append(RETRIEVAL_DEFINITION)
    if report.n_runs > 1:
        lines.append(f"Correct counts are means over {report.n_runs} runs.")
    return "\n".join(lines)


def _format_row(label: str, row: ReportRow) -> list[str]:
    return [
        label,
        f"{row.total:g}",
        f"{row.correct:.2f}".rstrip("0").rstrip("."),
        f"{row.avg_retrieval:.2f}",
        f"{row.accuracy * 100:.1f}%",
    ]


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    def _row(r: ReportRow) -> dict[str, float]:
        return {
            "total": r.total,
            "correct": r.correct,
            "accuracy": r.accuracy,
            "avg_retrieval": r.avg_retrieval,
        }

    return {
        "n_runs": report.n_runs,
        "retrieval_definition": RETRIEVAL_DEFINITION,
        "rows": {level: _row(r) for level, r in report.rows.items()},
        "overall": _row(report.overall),
        "attempt_histogram": {str(k): v for k, v in report.histogram.items()},
        "records": [r.to_dict() for r in report.records],
    }


def histogram_csv(report: EvalReport) -> str:
    lines = ["attempts,count"]
    lines += [f"{attempts},{count}" for attempts, count in report.histogram.items()]
    return "\n".join(lines) + "\n"


def write_report_files(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "text": out / "report.txt",
        "histogram": out / "histogram.csv",
    }
    paths["json"].write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True), encoding="utf-8"
    )
    paths["text"].write_text(render_report_table(report) + "\n", encoding="utf-8")
    paths["histogram"].write_text(histogram_csv(report), encoding="utf-8")
    return paths
