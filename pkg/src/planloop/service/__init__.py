from .app import create_app
from .store import SessionRecord, SessionStore

__all__ = ["SessionRecord", "SessionStore", "create_app"]
