"""HTTP collection service: session creation, gating, and track upload.

All session mutation runs under a per-session lock; every response body is
free of validation flags and captcha answers (those stay in the store).
"""

from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .. import qc
from ..pipeline import track_frequency
from ..trackio import save_track
from ..types import (
    SCREEN_SPACE,
    DisplayGeometry,
    MouseTrack,
    PipelineConfig,
    ValidationError,
    VideoMeta,
    VideoRect,
)
from .store import (
    MIDDLE_CHECKPOINT_POSITION,
    PLAYLIST_LENGTH,
    STATE_CAPTCHA2_PENDING,
    STATE_CREATED,
    STATE_FINALIZED,
    STATE_REACTION_PASSED,
    STATE_REJECTED,
    STATE_VIEWING,
    VALIDATION_COUNT,
    CaptchaChallenge,
    ConflictError,
    PlaylistEntry,
    ProtocolError,
    SessionRecord,
    SessionStore,
    StoredView,
    validate_rating,
)

CONTENT_PER_PLAYLIST = PLAYLIST_LENGTH - VALIDATION_COUNT


@dataclass(frozen=True)
class CaptchaClip:
    clip_id: str
    locale: str
    answer: str


@dataclass
class ServiceConfig:
    store: SessionStore
    meta: dict[str, VideoMeta]
    content_ids: list[str]
    validation_ids: list[str]
    captcha_clips: list[CaptchaClip]
    synonyms: dict[str, dict[str, str]] = field(default_factory=dict)
    videos_dir: Path | None = None
    captcha_dir: Path | None = None
    seed: int = 0
    captcha_retry_budget: int = 2
    reaction_rect_fraction: float = 0.1
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def validate(self) -> None:
        if len(self.content_ids) < CONTENT_PER_PLAYLIST:
            raise ValidationError(
                f"need at least {CONTENT_PER_PLAYLIST} content videos, have {len(self.content_ids)}"
            )
        if len(self.validation_ids) < VALIDATION_COUNT:
            raise ValidationError(
                f"need at least {VALIDATION_COUNT} validation videos, have {len(self.validation_ids)}"
            )
        missing = [v for v in self.content_ids + self.validation_ids if v not in self.meta]
        if missing:
            raise ValidationError(f"videos without metadata: {missing}")
        if not self.captcha_clips:
            raise ValidationError("no captcha clips configured")


class SessionRequest(BaseModel):
    screen_w: int
    screen_h: int
    locale: str = "en"


class ReactionAttemptBody(BaseModel):
    samples: list[list[float]]


class ReactionRequest(BaseModel):
    attempts: list[ReactionAttemptBody]


class CaptchaRequest(BaseModel):
    checkpoint: str
    answer: str


class RectBody(BaseModel):
    x: float
    y: float
    w: float
    h: float


class ViewRequest(BaseModel):
    video_id: str
    rating: int = Field(ge=1, le=5)
    samples: list[list[float]]
    video_rect: RectBody


def _trajectory_for(config: ServiceConfig, geom: DisplayGeometry) -> qc.RectTrajectory:
    return qc.RectTrajectory(
        screen_w=geom.screen_w,
        screen_h=geom.screen_h,
        rect_w=config.reaction_rect_fraction * geom.screen_w,
        rect_h=config.reaction_rect_fraction * geom.screen_h,
    )


def _trajectory_dict(t: qc.RectTrajectory) -> dict:
    return {
        "screen_w": t.screen_w,
        "screen_h": t.screen_h,
        "rect_w": t.rect_w,
        "rect_h": t.rect_h,
        "period_ms": t.period_ms,
        "start_corner": t.start_corner,
        "clockwise": t.clockwise,
    }


def parse_samples(samples: list[list[float]]) -> list[tuple[float, float, float]]:
    """Truncate timestamps to integer ms and collapse duplicate stamps,
    keeping the last sample of each run."""
    cleaned: list[tuple[float, float, float]] = []
    for s in samples:
        if len(s) != 3:
            raise ValidationError("each sample must be [t, x, y]")
        t, x, y = float(s[0]), float(s[1]), float(s[2])
        if not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
            raise ValidationError("non-finite sample value")
        t = float(math.floor(t))
        if cleaned and t == cleaned[-1][0]:
            cleaned[-1] = (t, x, y)
        else:
            cleaned.append((t, x, y))
    return cleaned


def create_app(config: ServiceConfig) -> FastAPI:
    config.validate()
    app = FastAPI(title="attention collection service")
    rng = random.Random(config.seed)
    session_counter = {"n": 0}
    store = config.store

    def next_session_identity() -> tuple[str, str]:
        session_counter["n"] += 1
        token = "".join(rng.choice("0123456789abcdef") for _ in range(32))
        return token, f"viewer{session_counter['n']:05d}"

    def build_playlist() -> list[PlaylistEntry]:
        content = rng.sample(sorted(config.content_ids), CONTENT_PER_PLAYLIST)
        validation = rng.sample(sorted(config.validation_ids), VALIDATION_COUNT)
        entries = [PlaylistEntry(v, False) for v in content]
        for vid in validation:
            entries.insert(rng.randint(0, len(entries)), PlaylistEntry(vid, True))
        return entries

    def pick_captchas(locale: str) -> list[CaptchaChallenge]:
        pool = [c for c in config.captcha_clips if c.locale == locale] or list(config.captcha_clips)
        picks = rng.sample(sorted(pool, key=lambda c: c.clip_id), 2) if len(pool) >= 2 else [pool[0], pool[0]]
        return [
            CaptchaChallenge(qc.CHECKPOINT_START, picks[0].clip_id, picks[0].answer),
            CaptchaChallenge(qc.CHECKPOINT_MIDDLE, picks[1].clip_id, picks[1].answer),
        ]

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    def load_locked(session_id: str) -> SessionRecord:
        return store.load_session(session_id)

    @app.exception_handler(ProtocolError)
    async def _protocol_error(request: Request, exc: ProtocolError):
        return error(409, str(exc))

    @app.exception_handler(ConflictError)
    async def _conflict_error(request: Request, exc: ConflictError):
        return error(409, str(exc))

    @app.exception_handler(ValidationError)
    async def _validation_error(request: Request, exc: ValidationError):
        return error(422, str(exc))

    @app.exception_handler(KeyError)
    async def _missing(request: Request, exc: KeyError):
        return error(404, f"unknown session {exc.args[0]!r}" if exc.args else "not found")

    @app.post("/api/v1/session")
    def create_session(body: SessionRequest):
        geom = DisplayGeometry(
            body.screen_w,
            body.screen_h,
            VideoRect(0, 0, body.screen_w, body.screen_h),
        )
        geom.validate()
        session_id, viewer_id = next_session_identity()
        now = time.time()
        if not qc.check_screen(geom, config.pipeline.min_screen):
            record = SessionRecord(
                session_id=session_id,
                viewer_id=viewer_id,
                geometry=geom,
                locale=body.locale,
                playlist=[],
                captchas=[],
                state=STATE_REJECTED,
                rejected_reason="screen_too_small",
                created_at=now,
                updated_at=now,
            )
            store.save_session(record)
            return error(403, "screen_too_small")
        record = SessionRecord(
            session_id=session_id,
            viewer_id=viewer_id,
            geometry=geom,
            locale=body.locale,
            playlist=build_playlist(),
            captchas=pick_captchas(body.locale),
            synonyms=config.synonyms.get(body.locale, {}),
            created_at=now,
            updated_at=now,
        )
        store.save_session(record)
        trajectory = _trajectory_for(config, geom)
        return {
            "session_id": session_id,
            "playlist": [
                {
                    "video_id": e.video_id,
                    "url": f"/api/v1/video/{e.video_id}",
                    "duration_ms": config.meta[e.video_id].duration_ms,
                }
                for e in record.playlist
            ],
            "reaction": _trajectory_dict(trajectory),
            "captcha_clips": {
                c.checkpoint: {"clip_id": c.clip_id, "url": f"/api/v1/captcha/{c.clip_id}"}
                for c in record.captchas
            },
        }

    @app.post("/api/v1/session/{session_id}/reaction")
    def submit_reaction(session_id: str, body: ReactionRequest):
        with store.lock(session_id):
            record = load_locked(session_id)
            if record.state == STATE_REJECTED:
                raise ProtocolError("session is rejected")
            if record.state != STATE_CREATED:
                raise ProtocolError(f"reaction test not allowed in state {record.state}")
            if len(body.attempts) != qc.REACTION_ATTEMPT_COUNT:
                raise ValidationError(f"expected {qc.REACTION_ATTEMPT_COUNT} attempts, got {len(body.attempts)}")
            trajectory = _trajectory_for(config, record.geometry)
            attempts = [
                qc.ReactionAttempt.from_samples(trajectory, parse_samples(a.samples)) for a in body.attempts
            ]
            passed, best = qc.score_reaction_test(attempts)
            record.reaction_attempts = [
                {"samples": parse_samples(a.samples), "trajectory": _trajectory_dict(trajectory)}
                for a in body.attempts
            ]
            record.reaction_passed = passed
            record.reaction_best = best
            record.state = STATE_REACTION_PASSED if passed else STATE_REJECTED
            if not passed:
                record.rejected_reason = "reaction_failed"
            record.updated_at = time.time()
            store.save_session(record)
            return {"pass": passed}

    @app.post("/api/v1/session/{session_id}/captcha")
    def submit_captcha(session_id: str, body: CaptchaRequest):
        with store.lock(session_id):
            record = load_locked(session_id)
            if record.state == STATE_REJECTED:
                raise ProtocolError("session is rejected")
            expected_state = {
                qc.CHECKPOINT_START: STATE_REACTION_PASSED,
                qc.CHECKPOINT_MIDDLE: STATE_CAPTCHA2_PENDING,
            }.get(body.checkpoint)
            if expected_state is None:
                raise ValidationError(f"unknown checkpoint {body.checkpoint!r}")
            if record.state != expected_state:
                raise ProtocolError(f"captcha {body.checkpoint} not allowed in state {record.state}")
            challenge = record.captcha(body.checkpoint)
            challenge.attempts.append(body.answer)
            table = record.synonyms or config.synonyms.get(record.locale, {})
            ok = qc.verify_captcha(challenge.answer, body.answer, table)
            retries_left = config.captcha_retry_budget - len(challenge.attempts)
            if ok:
                challenge.passed = True
                record.state = STATE_VIEWING
            elif retries_left <= 0:
                record.state = STATE_REJECTED
                record.rejected_reason = f"captcha_{body.checkpoint}_failed"
            record.updated_at = time.time()
            store.save_session(record)
            return {"pass": ok, "retries_left": max(0, retries_left)}

    @app.post("/api/v1/session/{session_id}/view")
    def submit_view(session_id: str, body: ViewRequest):
        with store.lock(session_id):
            record = load_locked(session_id)
            if record.state == STATE_REJECTED:
                raise ProtocolError("session is rejected")
            if record.state == STATE_FINALIZED:
                raise ProtocolError("session is finalized")
            if record.state == STATE_CAPTCHA2_PENDING:
                raise ProtocolError("middle captcha required before further uploads")
            if record.state != STATE_VIEWING:
                raise ProtocolError(f"upload not allowed in state {record.state}")
            expected = record.next_video_id()
            if body.video_id != expected:
                raise ProtocolError(f"expected upload for {expected!r}, got {body.video_id!r}")
            validate_rating(body.rating)

            rect = VideoRect(body.video_rect.x, body.video_rect.y, body.video_rect.w, body.video_rect.h)
            geom = DisplayGeometry(record.geometry.screen_w, record.geometry.screen_h, rect)
            geom.validate()
            video = config.meta[body.video_id]
            if not geom.rect_matches_aspect(video.width, video.height):
                raise ValidationError("video_rect does not preserve the video aspect ratio")

            samples = parse_samples(body.samples)
            track = MouseTrack.from_samples(
                samples,
                viewer_id=record.viewer_id,
                video_id=body.video_id,
                space=SCREEN_SPACE,
                geometry=geom,
            )
            track.validate()

            flags = []
            if track_frequency(track) < config.pipeline.min_track_hz:
                flags.append("frequency_fail")
            view = StoredView(
                position=record.cursor + 1,
                video_id=body.video_id,
                rating=body.rating,
                samples=[[t, x, y] for t, x, y in samples],
                video_rect=rect,
                flags=flags,
                received_at=time.time(),
            )
            store.save_view(session_id, view)
            record.cursor += 1
            if record.cursor == len(record.playlist):
                record.state = STATE_FINALIZED
            elif record.cursor == MIDDLE_CHECKPOINT_POSITION:
                record.state = STATE_CAPTCHA2_PENDING
            record.updated_at = time.time()
            store.save_session(record)
            return {"accepted": True, "flags": flags}

    def _file_response(path: Path, request: Request, media_type: str) -> Response:
        data = path.read_bytes()
        range_header = request.headers.get("range")
        if range_header:
            try:
                unit, _, spec = range_header.partition("=")
                if unit.strip().lower() != "bytes" or "," in spec:
                    raise ValueError
                start_s, _, end_s = spec.strip().partition("-")
                if start_s == "":
                    length = int(end_s)
                    start = max(0, len(data) - length)
                    end = len(data) - 1
                else:
                    start = int(start_s)
                    end = int(end_s) if end_s else len(data) - 1
                end = min(end, len(data) - 1)
                if start > end or start >= len(data):
                    raise ValueError
            except ValueError:
                return Response(status_code=416, headers={"Content-Range": f"bytes */{len(data)}"})
            chunk = data[start : end + 1]
            return Response(
                content=chunk,
                status_code=206,
                media_type=media_type,
                headers={
                    "Content-Range": f"bytes {start}-{end}/{len(data)}",
                    "Accept-Ranges": "bytes",
                },
            )
        return Response(content=data, media_type=media_type, headers={"Accept-Ranges": "bytes"})

    @app.get("/api/v1/video/{video_id}")
    def get_video(video_id: str, request: Request):
        if video_id not in config.meta or config.videos_dir is None:
            return error(404, f"unknown video {video_id!r}")
        matches = sorted(config.videos_dir.glob(f"{video_id}.*"))
        if not matches:
            return error(404, f"no file for video {video_id!r}")
        return _file_response(matches[0], request, "video/mp4")

    @app.get("/api/v1/captcha/{clip_id}")
    def get_captcha_clip(clip_id: str, request: Request):
        if config.captcha_dir is None:
            return error(404, "no captcha clips available")
        matches = sorted(config.captcha_dir.glob(f"{clip_id}.*"))
        if not matches:
            return error(404, f"no clip {clip_id!r}")
        return _file_response(matches[0], request, "audio/mpeg")

    app.state.config = config
    return app


# ---------------------------------------------------------------------------
# Export and offline QC input
# ---------------------------------------------------------------------------


def view_track(record: SessionRecord, view: StoredView) -> MouseTrack:
    geom = DisplayGeometry(record.geometry.screen_w, record.geometry.screen_h, view.video_rect)
    return MouseTrack.from_samples(
        view.samples,
        viewer_id=record.viewer_id,
        video_id=view.video_id,
        space=SCREEN_SPACE,
        geometry=geom,
    )


def session_data(config: ServiceConfig, record: SessionRecord, views: list[StoredView]) -> qc.SessionData:
    """Assemble the QC-facing record for one finalized session."""
    validation_ids = {e.video_id for e in record.playlist if e.is_validation}
    attempts = tuple(
        qc.ReactionAttempt.from_samples(qc.RectTrajectory(**a["trajectory"]), a["samples"])
        for a in record.reaction_attempts
    )
    captchas = tuple(
        qc.CaptchaRecord(c.checkpoint, c.answer, tuple(c.attempts)) for c in record.captchas
    )
    view_records = tuple(
        qc.ViewRecord(
            video_id=v.video_id,
            is_validation=v.video_id in validation_ids,
            rating=v.rating,
            track=view_track(record, v),
        )
        for v in views
    )
    # prefer the table snapshotted at collection time; fall back to the
    # current service config for records from before the snapshot existed
    synonyms = record.synonyms or config.synonyms.get(record.locale, {})
    return qc.SessionData(
        viewer_id=record.viewer_id,
        geometry=record.geometry,
        reaction_attempts=attempts,
        captchas=captchas,
        views=view_records,
        synonyms=synonyms,
    )


def export_views(
    store: SessionStore,
    out_dir: Path,
    qc_passed_only: bool = False,
    qc_reports: dict[str, qc.QcReport] | None = None,
) -> Path:
    """Write track files plus a manifest CSV; deterministic ordering.

    With ``qc_passed_only``, sessions whose report failed are dropped and
    frequency-flagged views are skipped (``qc_reports`` keyed by session id).
    """
    out_dir = Path(out_dir)
    tracks_dir = out_dir / "tracks"
    tracks_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for session_id in store.session_ids():
        record = store.load_session(session_id)
        report = (qc_reports or {}).get(session_id)
        if qc_passed_only and (report is None or not report.overall_pass):
            continue
        validation_ids = {e.video_id for e in record.playlist if e.is_validation}
        flagged = (
            {v.video_id for v in report.views if not v.frequency_ok} if report is not None else set()
        )
        for view in store.load_views(session_id):
            if qc_passed_only and view.video_id in flagged:
                continue
            name = f"{session_id}_{view.position:02d}_{view.video_id}.csv"
            (tracks_dir / name).write_bytes(save_track(view_track(record, view)))
            rows.append(
                {
                    "session_id": session_id,
                    "viewer_id": record.viewer_id,
                    "video_id": view.video_id,
                    "position": view.position,
                    "is_validation": int(view.video_id in validation_ids),
                    "rating": view.rating,
                    "flags": ";".join(view.flags),
                    "track_file": f"tracks/{name}",
                }
            )
    manifest = out_dir / "manifest.csv"
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf,
        fieldnames=[
            "session_id",
            "viewer_id",
            "video_id",
            "position",
            "is_validation",
            "rating",
            "flags",
            "track_file",
        ],
        lineterminator="\n",
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    manifest.write_text(buf.getvalue())
    return manifest
