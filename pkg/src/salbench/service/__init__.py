from .app import CaptchaClip, ServiceConfig, create_app, export_views, session_data, view_track
from .store import (
    MIDDLE_CHECKPOINT_POSITION,
    PLAYLIST_LENGTH,
    VALIDATION_COUNT,
    ConflictError,
    ProtocolError,
    SessionRecord,
    SessionStore,
    StoredView,
)

__all__ = [
    "CaptchaClip",
    "ServiceConfig",
    "create_app",
    "export_views",
    "session_data",
    "view_track",
    "SessionRecord",
    "SessionStore",
    "StoredView",
    "ProtocolError",
    "ConflictError",
    "PLAYLIST_LENGTH",
    "VALIDATION_COUNT",
    "MIDDLE_CHECKPOINT_POSITION",
]
