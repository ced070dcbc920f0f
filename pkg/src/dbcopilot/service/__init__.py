"""HTTP service wrapping the agent: sessions, messages, event streams."""

from .app import create_app
from .manager import AgentEvent, SessionService

__all__ = ["AgentEvent", "SessionService", "create_app"]
