"""Language-model abstraction: chat-with-tools requests and responses.

Tool calls are represented structurally (name plus argument map), never
parsed out of free text; providers that answer with JSON text are adapted
inside their backend. The scripted backend replays canned responses in
order and is the deterministic test double every trajectory test runs on.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

import httpx

from .errors import ProviderError, ScriptExhausted, ScriptMismatch


@dataclass(frozen=True)
class ToolCallRequest:
    tool: str
    arguments: dict[str, Any]


@dataclass
class ModelRequest:
    prompt_sections: list[tuple[str, str]]  # ordered (label, text) blocks
    tool_declarations: Sequence[Any] = field(default_factory=list)
    temperature: float = 0.0

    def __post_init__(self) -> None:
        names = [d.name for d in self.tool_declarations]
        if len(set(names)) != len(names):
            raise ValueError("tool names must be unique")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def prompt(self) -> str:
        return "\n\n".join(f"## {label}\n{text}" for label, text in self.prompt_sections)


@dataclass
class ModelResponse:
    kind: str  # "text" | "tool_call"
    text: str | None = None
    tool_call: ToolCallRequest | None = None
    rationale: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "text" and (self.text is None or self.tool_call is not None):
            raise ValueError("text response must carry text and no tool call")
        if self.kind == "tool_call" and (self.tool_call is None or self.text is not None):
            raise ValueError("tool_call response must carry a tool call and no text")
        if self.kind not in ("text", "tool_call"):
            raise ValueError(f"unknown response kind: {self.kind}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelResponse":
        if data.get("kind") == "tool_call" or "tool" in data:
            return cls(
                kind="tool_call",
                tool_call=ToolCallRequest(
                    tool=data["tool"], arguments=dict(data.get("arguments", {}))
                ),
                rationale=data.get("rationale"),
            )
        return cls(kind="text", text=data.get("text", ""), rationale=data.get("rationale"))


class Backend(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


def match_request(matcher: dict[str, Any], request: ModelRequest) -> bool:
    """Declarative request matcher for scripts. Supported keys:
    prompt_contains (str or list), prompt_lacks (str or list),
    tool_declared (str). An empty matcher accepts anything."""
    prompt = request.prompt
    contains = matcher.get("prompt_contains", [])
    if isinstance(contains, str):
        contains = [contains]
    for needle in contains:
        if needle not in prompt:
            return False
    lacks = matcher.get("prompt_lacks", [])
    if isinstance(lacks, str):
        lacks = [lacks]
    for needle in lacks:
        if needle in prompt:
            return False
    tool = matcher.get("tool_declared")
    if tool is not None and tool not in [d.name for d in request.tool_declarations]:
        return False
    return True


@dataclass
class ScriptStep:
    response: ModelResponse
    matcher: dict[str, Any] = field(default_factory=dict)


class ScriptedBackend:
    """Canned responses consumed strictly in order; a rejected matcher means
    the trajectory diverged from the recording and is an error, not a skip."""

    def __init__(self, steps: Sequence[ScriptStep]) -> None:
        self._steps = list(steps)
        self._cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_steps(cls, raw: Sequence[dict[str, Any]]) -> "ScriptedBackend":
        steps = [
            ScriptStep(
                response=ModelResponse.from_dict(item.get("response", item)),
                matcher=dict(item.get("match", {})),
            )
            for item in raw
        ]
        return cls(steps)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ValueError("script file must hold a JSON list of steps")
        return cls.from_steps(data)

    @property
    def remaining(self) -> int:
        return len(self._steps) - self._cursor

    def complete(self, request: ModelRequest) -> ModelResponse:
        with self._lock:
            if self._cursor >= len(self._steps):
                raise ScriptExhausted(
                    f"script exhausted after {len(self._steps)} responses"
                )
            step = self._steps[self._cursor]
            if not match_request(step.matcher, request):
                raise ScriptMismatch(
                    f"step {self._cursor} matcher {step.matcher!r} rejected request; "
                    f"prompt was:\n{request.prompt[:500]}"
                )
            self._cursor += 1
            return step.response


class RecordingBackend:
    """Wraps another backend and keeps every request/response pair; used by
    replay tests and by the harness's gold-leak scan."""

    def __init__(self, inner: Backend) -> None:
        self._inner = inner
        self.requests: list[ModelRequest] = []
        self.responses: list[ModelResponse] = []

    def complete(self, request: ModelRequest) -> ModelResponse:
        self.requests.append(request)
        response = self._inner.complete(request)
        self.responses.append(response)
        return response


class HttpBackend:
    """OpenAI-style chat-completions backend. Base URL, model, and API key
    come from environment variables so credentials never live in config
    files."""

    def __init__(
        self,
        base_url_env: str = "LLM_BASE_URL",
        api_key_env: str = "LLM_API_KEY",
        model_env: str = "LLM_MODEL",
        model: str | None = None,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ) -> None:
        base_url = os.environ.get(base_url_env, "")
        if not base_url:
            raise ProviderError(f"environment variable {base_url_env} is not set")
        self._base_url = base_url.rstrip("/")
        self._api_key = os.environ.get(api_key_env, "")
        self._model = model or os.environ.get(model_env, "")
        if not self._model:
            raise ProviderError(f"model not configured ({model_env} unset)")
        self._client = client or httpx.Client(timeout=timeout)

    def _payload(self, request: ModelRequest) -> dict[str, Any]:
        messages = []
        rest: list[str] = []
        for label, text in request.prompt_sections:
            if label == "System" and not messages:
                messages.append({"role": "system", "content": text})
            else:
                rest.append(f"## {label}\n{text}")
        messages.append({"role": "user", "content": "\n\n".join(rest)})
        payload: dict[str, Any] = {
            "model": self._model,
            "messages": messages,
            "temperature": request.temperature,
        }
        if request.tool_declarations:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": d.name,
                        "description": d.description,
                        "parameters": d.to_json_schema(),
                    },
                }
                for d in request.tool_declarations
            ]
        return payload

    def complete(self, request: ModelRequest) -> ModelResponse:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            resp = self._client.post(
                f"{self._base_url}/chat/completions",
                json=self._payload(request),
                headers=headers,
            )
            resp.raise_for_status()
            body = resp.json()
        except httpx.HTTPError as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        try:
            message = body["choices"][0]["message"]
        except (KeyError, IndexError) as exc:
            raise ProviderError(f"malformed provider response: {body!r}") from exc
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            fn = tool_calls[0]["function"]
            try:
                arguments = json.loads(fn.get("arguments") or "{}")
            except json.JSONDecodeError as exc:
                raise ProviderError(
                    f"provider returned unparseable tool arguments: {fn!r}"
                ) from exc
            return ModelResponse(
                kind="tool_call",
                tool_call=ToolCallRequest(tool=fn["name"], arguments=arguments),
                rationale=message.get("content") or None,
            )
        return ModelResponse(kind="text", text=message.get("content") or "")
