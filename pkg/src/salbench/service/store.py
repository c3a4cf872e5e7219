"""File-backed session store and the viewing-protocol state machine.

Layout: one directory per session under ``<root>/sessions/``, holding a
``session.json`` snapshot and one ``views/NN.json`` per uploaded view.
Every write goes through tmp-file + rename, so a view is either fully
present (samples, rect, and rating together) or absent.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..qc import CHECKPOINT_MIDDLE, CHECKPOINT_START
from ..types import DisplayGeometry, ValidationError, VideoRect

STATE_CREATED = "created"
STATE_REACTION_PASSED = "reaction_passed"
STATE_VIEWING = "viewing"
STATE_CAPTCHA2_PENDING = "captcha2_pending"
STATE_FINALIZED = "finalized"
STATE_REJECTED = "rejected"

PLAYLIST_LENGTH = 23
VALIDATION_COUNT = 3
MIDDLE_CHECKPOINT_POSITION = 12  # 1-based playlist position after which the middle captcha is due


class ProtocolError(ValueError):
    """Request violates the session protocol (wrong state or order)."""


class ConflictError(ValueError):
    """Request duplicates an already-recorded step."""


@dataclass
class PlaylistEntry:
    video_id: str
    is_validation: bool


@dataclass
class CaptchaChallenge:
    checkpoint: str
    clip_id: str
    answer: str
    attempts: list[str] = field(default_factory=list)
    passed: bool = False


@dataclass
class StoredView:
    position: int  # 1-based playlist slot
    video_id: str
    rating: int
    samples: list[list[float]]  # [t_ms, x, y]
    video_rect: VideoRect
    flags: list[str]
    received_at: float


@dataclass
class SessionRecord:
    session_id: str
    viewer_id: str
    geometry: DisplayGeometry
    locale: str
    playlist: list[PlaylistEntry]
    captchas: list[CaptchaChallenge]
    state: str = STATE_CREATED
    cursor: int = 0  # number of uploaded views
    reaction_attempts: list[dict] = field(default_factory=list)
    reaction_passed: bool = False
    reaction_best: float = 0.0
    # locale synonym table snapshotted at creation so offline QC can
    # re-verify spelled-out captcha answers without the service config
    synonyms: dict[str, str] = field(default_factory=dict)
    rejected_reason: str | None = None
    created_at: float = 0.0
    updated_at: float = 0.0

    def next_video_id(self) -> str | None:
        if self.cursor >= len(self.playlist):
            return None
        return self.playlist[self.cursor].video_id

    def captcha(self, checkpoint: str) -> CaptchaChallenge:
        for c in self.captchas:
            if c.checkpoint == checkpoint:
                return c
        raise ProtocolError(f"unknown checkpoint {checkpoint!r}")

    def to_dict(self) -> dict:
        g = self.geometry
        return {
            "session_id": self.session_id,
            "viewer_id": self.viewer_id,
            "locale": self.locale,
            "screen_w": g.screen_w,
            "screen_h": g.screen_h,
            "video_rect": [g.video_rect.x, g.video_rect.y, g.video_rect.w, g.video_rect.h],
            "playlist": [{"video_id": e.video_id, "is_validation": e.is_validation} for e in self.playlist],
            "captchas": [
                {
                    "checkpoint": c.checkpoint,
                    "clip_id": c.clip_id,
                    "answer": c.answer,
                    "attempts": c.attempts,
                    "passed": c.passed,
                }
                for c in self.captchas
            ],
            "state": self.state,
            "cursor": self.cursor,
            "reaction_attempts": self.reaction_attempts,
            "reaction_passed": self.reaction_passed,
            "reaction_best": self.reaction_best,
            "synonyms": self.synonyms,
            "rejected_reason": self.rejected_reason,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionRecord":
        rect = d["video_rect"]
        return cls(
            session_id=d["session_id"],
            viewer_id=d["viewer_id"],
            geometry=DisplayGeometry(d["screen_w"], d["screen_h"], VideoRect(*rect)),
            locale=d["locale"],
            playlist=[PlaylistEntry(e["video_id"], e["is_validation"]) for e in d["playlist"]],
            captchas=[
                CaptchaChallenge(c["checkpoint"], c["clip_id"], c["answer"], c["attempts"], c["passed"])
                for c in d["captchas"]
            ],
            state=d["state"],
            cursor=d["cursor"],
            reaction_attempts=d["reaction_attempts"],
            reaction_passed=d["reaction_passed"],
            reaction_best=d["reaction_best"],
            synonyms=d.get("synonyms", {}),
            rejected_reason=d["rejected_reason"],
            created_at=d["created_at"],
            updated_at=d["updated_at"],
        )


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class SessionStore:
    """Durable session state.  Per-session operations are serialized by a
    lock; stored views are immutable once written."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def save_session(self, record: SessionRecord) -> None:
        d = self.session_dir(record.session_id)
        (d / "views").mkdir(parents=True, exist_ok=True)
        _write_atomic(d / "session.json", json.dumps(record.to_dict(), sort_keys=True).encode())

    def load_session(self, session_id: str) -> SessionRecord:
        path = self.session_dir(session_id) / "session.json"
        if not path.exists():
            raise KeyError(session_id)
        return SessionRecord.from_dict(json.loads(path.read_text()))

    def session_ids(self) -> list[str]:
        base = self.root / "sessions"
        return sorted(p.name for p in base.iterdir() if (p / "session.json").exists())

    def save_view(self, session_id: str, view: StoredView) -> None:
        path = self.session_dir(session_id) / "views" / f"{view.position:02d}.json"
        if path.exists():
            raise ConflictError(f"view {view.position} already stored")
        payload = {
            "position": view.position,
            "video_id": view.video_id,
            "rating": view.rating,
            "samples": view.samples,
            "video_rect": [view.video_rect.x, view.video_rect.y, view.video_rect.w, view.video_rect.h],
            "flags": view.flags,
            "received_at": view.received_at,
        }
        _write_atomic(path, json.dumps(payload, sort_keys=True).encode())

    def load_views(self, session_id: str) -> list[StoredView]:
        views_dir = self.session_dir(session_id) / "views"
        if not views_dir.exists():
            return []
        out = []
        for path in sorted(views_dir.glob("[0-9][0-9].json")):
            d = json.loads(path.read_text())
            out.append(
                StoredView(
                    position=d["position"],
                    video_id=d["video_id"],
                    rating=d["rating"],
                    samples=d["samples"],
                    video_rect=VideoRect(*d["video_rect"]),
                    flags=d["flags"],
                    received_at=d["received_at"],
                )
            )
        return out


def validate_rating(rating: int) -> None:
    if not isinstance(rating, int) or not (1 <= rating <= 5):
        raise ValidationError(f"rating must be an integer in 1..5, got {rating!r}")


def checkpoint_for_cursor(cursor: int) -> str | None:
    """Which captcha checkpoint is due before uploading view ``cursor + 1``."""
    if cursor == 0:
        return CHECKPOINT_START
    if cursor == MIDDLE_CHECKPOINT_POSITION:
        return CHECKPOINT_MIDDLE
    return None
