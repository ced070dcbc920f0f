"""FastAPI application over the SessionService.

Endpoints (JSON bodies, documented in the repo README):
  POST /sessions                      create a session on a configured db
  GET  /sessions/{id}                 session descriptor
  POST /sessions/{id}/messages        submit a user message or confirmation
  GET  /sessions/{id}/events          line-delimited JSON event stream
  GET  /databases                     configured databases and their tables

The event stream replays everything at or after from_seq, then (with
follow=true, the default) tails live until the session goes quiescent;
reconnecting with the last seen seq loses nothing.
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from ..config import AppConfig
from ..errors import (
    InvalidSessionState,
    NoPendingPlan,
    NoSuchSession,
    SessionBusy,
    UnknownDatabase,
)
from .manager import SessionService
from .models import (
    CreateSessionRequest,
    DatabaseInfo,
    PostMessageRequest,
    PostMessageResponse,
    SessionDescriptor,
    SessionSchemaResponse,
)

_STREAM_POLL_SECONDS = 0.02


def create_app(
    config: AppConfig | None = None,
    service: SessionService | None = None,
) -> FastAPI:
    if service is None:
        if config is None:
            raise ValueError("create_app needs a config or a service")
        service = SessionService(config)

    app = FastAPI(title="dbcopilot", version="0.1.0")
    app.state.service = service

    @app.exception_handler(NoSuchSession)
    @app.exception_handler(UnknownDatabase)
    async def _not_found(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(SessionBusy)
    @app.exception_handler(NoPendingPlan)
    @app.exception_handler(InvalidSessionState)
    async def _conflict(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.get("/databases", response_model=list[DatabaseInfo])
    async def list_databases() -> list[DatabaseInfo]:
        return [DatabaseInfo(**d) for d in service.list_databases()]

    @app.post("/sessions", response_model=SessionDescriptor, status_code=201)
    async def create_session(body: CreateSessionRequest) -> SessionDescriptor:
        return SessionDescriptor(**service.create_session(body.db_ref))

    @app.get("/sessions/{session_id}", response_model=SessionDescriptor)
    async def get_session(session_id: str) -> SessionDescriptor:
        return SessionDescriptor(**service.get_session(session_id))

    @app.get("/sessions/{session_id}/schema", response_model=SessionSchemaResponse)
    async def get_session_schema(session_id: str) -> SessionSchemaResponse:
        return SessionSchemaResponse(**service.get_session_schema(session_id))

    @app.post(
        "/sessions/{session_id}/messages",
        response_model=PostMessageResponse,
        status_code=202,
    )
    async def post_message(
        session_id: str, body: PostMessageRequest
    ) -> PostMessageResponse:
        seq_start = service.post_message(session_id, body.text)
        return PostMessageResponse(seq_start=seq_start)

    @app.get("/sessions/{session_id}/events")
    async def stream_events(
        request: Request, session_id: str, from_seq: int = 0, follow: bool = True
    ) -> StreamingResponse:
        service.get_session(session_id)  # 404 before the stream opens

        async def generate():
            seq = from_seq
            while True:
                events = service.events_since(session_id, seq)
                for event in events:
                    seq = event.seq + 1
                    yield json.dumps(event.to_dict(), sort_keys=True) + "\n"
                if not follow:
                    break
                if not events and service.is_quiescent(session_id):
                    break
                if await request.is_disconnected():
                    break
                await asyncio.sleep(_STREAM_POLL_SECONDS)

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    return app
