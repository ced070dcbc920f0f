"""Terminal entry points: interactive chat, the eval harness, the service,
and small inspection commands (statement profiles, table index search).

Every subcommand is a thin adapter: chat drives the same SessionService the
HTTP routes expose (or a remote server with --server), eval delegates to the
harness, and nothing here implements agent behavior of its own.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any, Iterator

import click
import httpx

from .config import AppConfig, load_config
from .dbadapter import Database
from .errors import (
    ConfigError,
    CopilotError,
    DatabaseConnectionError,
    ParseError,
    SessionBusy,
    SuiteConfigError,
)
from .evalharness import load_spider_tasks, render_report_table, run_suite
from .fixtures import (
    build_demo_db,
    build_mini_suite,
    load_script_file,
    scripted_runtime_factory,
)
from .llm import HttpBackend
from .schemaindex import HashedTrigramProvider, build_index, search_tables_by_name
from .service.manager import SessionService
from .sqlanalyzer import profile_statement


@click.group()
def cli() -> None:
    """Conversational SQL copilot."""


# ── helpers ────────────────────────────────────────────────────────────────


def _load_app_config(config_path: str | None) -> AppConfig:
    if config_path is None:
        return AppConfig()
    return load_config(config_path)


def _resolve_db(config: AppConfig, db: str) -> tuple[str, str]:
    """--db accepts a configured name or a URL/path; returns (ref, url)."""
    if db in config.databases:
        return db, config.databases[db]
    return "db", db


def format_table(columns: list[str], rows: list[list[Any]], max_rows: int = 25) -> str:
    def _cell(value: Any) -> str:
        if value is None:
            return "NULL"
        text = str(value)
        return text if len(text) <= 40 else text[:37] + "..."

    shown = [[_cell(v) for v in row] for row in rows[:max_rows]]
    headers = [str(c) for c in columns]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in shown)) if shown else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(r[i].ljust(widths[i]) for i in range(len(r))) for r in shown]
    if len(rows) > max_rows:
        lines.append(f"... ({len(rows) - max_rows} more rows)")
    return "\n".join(lines)


def render_event(event: dict[str, Any], show_reasoning: bool = True) -> None:
    body = event.get("body", {})
    etype = event.get("type")
    if etype == "reasoning" and show_reasoning:
        click.secho(f"  · {body.get('text', '')}", dim=True)
    elif etype == "tool_call":
        args = body.get("arguments", {})
        detail = args.get("sql") or args.get("query") or json.dumps(args)
        click.secho(f"  → {body.get('tool')}: {detail}", fg="cyan")
    elif etype == "tool_result":
        obs = body.get("observation", {})
        source = obs.get("source")
        content = obs.get("content")
        if source == "db_error":
            click.secho(f"  ✗ {content}", fg="red")
        elif source == "query_result" and isinstance(content, dict):
            rows = [list(r) for r in content.get("rows", [])]
            click.echo(_indent(format_table(content.get("column_names", []), rows)))
            if content.get("truncated"):
                click.secho("  (result truncated)", dim=True)
        elif isinstance(content, dict) and "affected_rows" in content:
            click.echo(f"  ✓ {content['affected_rows']} row(s) affected")
        else:
            click.echo(f"  {content}")
    elif etype == "plan_proposal":
        click.secho("  Proposed plan:", fg="yellow", bold=True)
        for i, step in enumerate(body.get("steps", []), 1):
            click.echo(f"    {i}. {step.get('description')}")
        for warning in body.get("warnings", []):
            click.secho(f"    ! {warning}", fg="yellow")
    elif etype == "confirmation_request":
        click.secho(f"  ? {body.get('text', '')}", fg="yellow")
    elif etype == "answer":
        click.secho(f"\n{body.get('text', '')}", bold=True)
        result = body.get("result")
        if isinstance(result, dict) and result.get("rows"):
            rows = [list(r) for r in result.get("rows", [])]
            click.echo(format_table(result.get("column_names", []), rows))
    elif etype == "error":
        click.secho(f"  error: {body.get('text', '')}", fg="red")


def _indent(text: str) -> str:
    return "\n".join("  " + line for line in text.splitlines())


# ── clients ────────────────────────────────────────────────────────────────


class LocalClient:
    """In-process thin client over the same SessionService the HTTP API uses."""

    def __init__(self, service: SessionService) -> None:
        self._service = service

    def create_session(self, db_ref: str) -> dict[str, Any]:
        return self._service.create_session(db_ref)

    def post_message(self, session_id: str, text: str) -> int:
        return self._service.post_message(session_id, text)

    def iter_events(self, session_id: str, from_seq: int) -> Iterator[dict[str, Any]]:
        seq = from_seq
        while True:
            events = self._service.wait_events(session_id, seq, timeout=0.1)
            for event in events:
                seq = event.seq + 1
                yield event.to_dict()
            if not events and self._service.is_quiescent(session_id):
                return


class HttpClient:
    """Thin client over a running server."""

    def __init__(self, base_url: str) -> None:
        self._http = httpx.Client(base_url=base_url, timeout=60.0)

    def create_session(self, db_ref: str) -> dict[str, Any]:
        resp = self._http.post("/sessions", json={"db_ref": db_ref})
        resp.raise_for_status()
        return resp.json()

    def post_message(self, session_id: str, text: str) -> int:
        resp = self._http.post(f"/sessions/{session_id}/messages", json={"text": text})
        if resp.status_code == 409:
            raise SessionBusy(resp.json().get("error", "session busy"))
        resp.raise_for_status()
        return resp.json()["seq_start"]

    def iter_events(self, session_id: str, from_seq: int) -> Iterator[dict[str, Any]]:
        with self._http.stream(
            "GET",
            f"/sessions/{session_id}/events",
            params={"from_seq": from_seq, "follow": True},
        ) as resp:
            resp.raise_for_status()
            for line in resp.iter_lines():
                if line.strip():
                    yield json.loads(line)


# ── chat ───────────────────────────────────────────────────────────────────


@cli.command()
@click.option("--db", required=True, help="Configured database name or SQLite URL/path.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--backend", type=click.Choice(["scripted", "http"]), default=None)
@click.option("--script", type=click.Path(exists=True), default=None,
              help="Script file for the scripted backend.")
@click.option("--max-cycles", type=int, default=None)
@click.option("--server", default=None, help="Base URL of a running dbcopilot server.")
@click.option("--show-reasoning/--hide-reasoning", default=True)
def chat(db, config_path, backend, script, max_cycles, server, show_reasoning):
    """Interactive conversation with one database."""
    try:
        if server:
            client: Any = HttpClient(server)
            db_ref = db
        else:
            config = _load_app_config(config_path)
            db_ref, url = _resolve_db(config, db)
            config.databases = {**config.databases, db_ref: url}
            if backend:
                config.llm.backend = backend
            if script:
                config.llm.script = script
            if max_cycles:
                config.engine.max_cycles = max_cycles
            client = LocalClient(SessionService(config))
        descriptor = client.create_session(db_ref)
    except (CopilotError, httpx.HTTPError, OSError) as exc:
        click.secho(f"startup failed: {exc}", fg="red", err=True)
        raise SystemExit(1)

    session_id = descriptor["session_id"]
    click.echo(f"connected to {descriptor['db_ref']} "
               f"(tables: {', '.join(descriptor['tables']) or 'none'})")
    click.echo("type a question; 'exit' to quit")

    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            click.echo()
            break
        if text.strip().lower() in ("exit", "quit"):
            break
        if not text.strip():
            continue
        try:
            seq = client.post_message(session_id, text)
            for event in client.iter_events(session_id, seq):
                render_event(event, show_reasoning=show_reasoning)
            click.echo()
        except KeyboardInterrupt:
            click.secho("(turn interrupted)", dim=True)
        except SessionBusy:
            click.secho("session is still working; try again shortly", fg="yellow")
        except (CopilotError, httpx.HTTPError) as exc:
            click.secho(f"error: {exc}", fg="red")


# ── serve ──────────────────────────────────────────────────────────────────


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.secho(str(exc), fg="red", err=True)
        raise SystemExit(2)
    app = create_app(config)
    uvicorn.run(
        app,
        host=host or config.service.host,
        port=port or config.service.port,
        log_level="warning",
    )


# ── eval ───────────────────────────────────────────────────────────────────


@cli.command(name="eval")
@click.option("--tasks", "task_file", type=click.Path(), required=True)
@click.option("--db-root", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n-runs", type=int, default=1)
@click.option("--workers", type=int, default=1)
@click.option("--backend", type=click.Choice(["scripted", "http"]), default="scripted")
@click.option("--script", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_command(task_file, db_root, out_dir, n_runs, workers, backend, script, config_path):
    """Run a Spider-format task suite and write report + histogram files.

    Low accuracy is data, not an error; the exit code is nonzero only for
    configuration problems.
    """
    try:
        config = _load_app_config(config_path)
        engine_config = config.engine
        tasks = load_spider_tasks(task_file, db_root)
        if backend == "scripted":
            if script is None:
                raise SuiteConfigError("--backend scripted requires --script")
            scripts = load_script_file(script)
            if "*" in scripts:
                shared = scripts["*"]
                scripts = {task.id: shared for task in tasks}
            factory = scripted_runtime_factory(scripts, config=engine_config)
        else:
            from .engine import make_runtime

            def factory(task, database):
                return make_runtime(
                    database,
                    HttpBackend(
                        base_url_env=config.llm.base_url_env,
                        api_key_env=config.llm.api_key_env,
                        model_env=config.llm.model_env,
                        model=config.llm.model,
                    ),
                    config=engine_config,
                )

        started = time.perf_counter()
        report = run_suite(
            tasks,
            db_root,
            factory,
            n_runs=n_runs,
            out_dir=out_dir,
            workers=workers,
        )
        elapsed = time.perf_counter() - started
    except (SuiteConfigError, ConfigError, ValueError) as exc:
        click.secho(str(exc), fg="red", err=True)
        raise SystemExit(2)

    click.echo(render_report_table(report))
    click.echo(f"\n{len(report.records)} records in {elapsed:.1f}s; "
               f"files written under {out_dir}")


# ── inspection ─────────────────────────────────────────────────────────────


@cli.command()
@click.argument("sql")
def profile(sql):
    """Print the statement profile as JSON."""
    try:
        click.echo(json.dumps(profile_statement(sql).to_dict(), indent=2))
    except ParseError as exc:
        click.secho(str(exc), fg="red", err=True)
        raise SystemExit(1)


@cli.command()
@click.option("--db", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def tables(db, config_path):
    """List tables (lexicographic)."""
    config = _load_app_config(config_path)
    _, url = _resolve_db(config, db)
    try:
        database = Database.connect(url)
    except DatabaseConnectionError as exc:
        click.secho(str(exc), fg="red", err=True)
        raise SystemExit(1)
    try:
        for name in database.list_tables():
            click.echo(name)
    finally:
        database.close()


@cli.command()
@click.argument("query")
@click.option("--db", required=True)
@click.option("-k", type=int, default=5)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def search(query, db, k, config_path):
    """Rank tables by similarity to QUERY."""
    config = _load_app_config(config_path)
    _, url = _resolve_db(config, db)
    try:
        database = Database.connect(url)
    except DatabaseConnectionError as exc:
        click.secho(str(exc), fg="red", err=True)
        raise SystemExit(1)
    try:
        index = build_index(database.list_tables(), HashedTrigramProvider())
        for cand in search_tables_by_name(index, query, k=k):
            click.echo(f"{cand.score:+.4f}  {cand.table}")
    finally:
        database.close()


@cli.command()
@click.argument("dest", type=click.Path())
def fixtures(dest):
    """Materialize the bundled demo database and mini eval suite."""
    dest_path = Path(dest)
    demo = build_demo_db(dest_path / "demo.sqlite")
    paths = build_mini_suite(dest_path / "mini_suite")
    config_path = dest_path / "config.toml"
    config_path.write_text(
        "\n".join(
            [
                "[databases]",
                f'demo = "sqlite:///{demo}"',
                f'shop = "sqlite:///{paths["db_root"] / "shop" / "shop.sqlite"}"',
                f'library = "sqlite:///{paths["db_root"] / "library" / "library.sqlite"}"',
                "",
                "[llm]",
                'backend = "http"',
                "",
            ]
        ),
        encoding="utf-8",
    )
    click.echo(f"demo database: {demo}")
    click.echo(f"mini-suite tasks: {paths['task_file']}")
    click.echo(f"mini-suite databases: {paths['db_root']}")
    click.echo(f"mini-suite scripts: {paths['script_file']}")
    click.echo(f"config: {config_path}")


def main() -> None:
    cli(prog_name="dbcopilot")


if __name__ == "__main__":
    main()
