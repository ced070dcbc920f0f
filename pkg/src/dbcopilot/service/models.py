"""Pydantic request/response bodies for the HTTP API."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    db_ref: str


class SessionDescriptor(BaseModel):
    session_id: str
    db_ref: str
    status: str
    turn_count: int
    tables: list[str] = Field(default_factory=list)


class PostMessageRequest(BaseModel):
    text: str


class PostMessageResponse(BaseModel):
    accepted: bool = True
    seq_start: int


class EventModel(BaseModel):
    session_id: str
    seq: int
    type: str
    body: dict[str, Any]


class DatabaseInfo(BaseModel):
    name: str
    tables: list[str]


class ColumnModel(BaseModel):
    name: str
    declared_type: str
    nullable: bool
    is_primary_key: bool


class ConstraintModel(BaseModel):
    kind: str
    columns: list[str]
    referenced_table: str | None = None
    referenced_columns: list[str] | None = None


class TableSchemaModel(BaseModel):
    name: str
    columns: list[ColumnModel]
    constraints: list[ConstraintModel]


class SessionSchemaResponse(BaseModel):
    session_id: str
    db_ref: str
    tables: list[TableSchemaModel]


class ErrorResponse(BaseModel):
    error: str
