from __future__ import annotations

import pytest

from dbcopilot.dbadapter import Database
from dbcopilot.engine import EngineConfig, ReactEngine, make_runtime
from dbcopilot.fixtures import build_demo_db
from dbcopilot.llm import ScriptedBackend
from dbcopilot.schemaindex import HashedTrigramProvider, build_index
from dbcopilot.session import Session


@pytest.fixture()
def demo_db(tmp_path) -> Database:
    path = build_demo_db(tmp_path / "demo.sqlite")
    db = Database.connect(str(path))
    yield db
    db.close()


@pytest.fixture()
def provider() -> HashedTrigramProvider:
    return HashedTrigramProvider()


@pytest.fixture()
def demo_index(demo_db, provider):
    return build_index(demo_db.list_tables(), provider)


def scripted_engine(db: Database, steps: list[dict], config: EngineConfig | None = None,
                    **runtime_kwargs) -> ReactEngine:
    backend = ScriptedBackend.from_steps(steps)
    runtime = make_runtime(db, backend, config=config, **runtime_kwargs)
    return ReactEngine(runtime)


def new_session(db_ref: str = "demo", session_id: str = "s-1") -> Session:
    return Session(id=session_id, db_ref=db_ref)


@pytest.fixture()
def engine_factory(demo_db):
    def factory(steps, config=None, **kwargs):
        return scripted_engine(demo_db, steps, config=config, **kwargs)

    return factory
