"""Shared fixtures: a tiny synthetic video corpus and a scripted viewer that
drives the collection service end to end."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import pytest

from salbench import pipeline, trackio
from salbench.qc import RectTrajectory
from salbench.service import CaptchaClip, ServiceConfig, SessionStore, create_app
from salbench.types import (
    SCREEN_SPACE,
    DisplayGeometry,
    MouseTrack,
    PipelineConfig,
    VideoMeta,
    aspect_fit_rect,
)

SCREEN_W, SCREEN_H = 1920, 1080
VIDEO_W, VIDEO_H = 192, 108
FPS = 10.0
DURATION_MS = 3000.0
SAMPLE_STEP_MS = 20  # 50 Hz cursor

CONTENT_IDS = [f"c{i:02d}" for i in range(1, 23)]
VALIDATION_IDS = ["v01", "v02", "v03"]

CAPTCHA_CLIPS = [
    CaptchaClip("clip_seven", "en", "7"),
    CaptchaClip("clip_four", "en", "4"),
    CaptchaClip("clip_nine", "en", "9"),
]
CAPTCHA_ANSWERS = {c.clip_id: c.answer for c in CAPTCHA_CLIPS}
SYNONYMS = {"en": {"seven": "7", "four": "4", "nine": "9"}}


def corpus_meta() -> dict[str, VideoMeta]:
    out = {}
    for vid in CONTENT_IDS + VALIDATION_IDS:
        out[vid] = VideoMeta(vid, VIDEO_W, VIDEO_H, duration_ms=DURATION_MS, fps=FPS)
    return out


def _path_params(video_id: str) -> tuple[float, float]:
    phase = (sum(ord(c) for c in video_id) % 17) / 17.0 * 2 * math.pi
    period = 2500.0 + (sum(ord(c) * 7 for c in video_id) % 1000)
    return phase, period


def cursor_video_pos(video_id: str, t_ms: float) -> tuple[float, float]:
    """Deterministic smooth path in video coordinates."""
    phase, period = _path_params(video_id)
    angle = phase + 2 * math.pi * t_ms / period
    cx, cy = VIDEO_W / 2.0, VIDEO_H / 2.0
    r = 0.3 * min(VIDEO_W, VIDEO_H)
    return (cx + r * math.cos(angle), cy + r * math.sin(angle))


def scripted_screen_samples(video_id: str, geometry: DisplayGeometry) -> list[list[float]]:
    """The scripted cursor in screen coordinates, sampled at 50 Hz."""
    rect = geometry.video_rect
    sx = rect.w / VIDEO_W
    sy = rect.h / VIDEO_H
    samples = []
    t = 0
    while t <= DURATION_MS:
        vx, vy = cursor_video_pos(video_id, t)
        samples.append([float(t), rect.x + vx * sx, rect.y + vy * sy])
        t += SAMPLE_STEP_MS
    return samples


def scripted_track(video_id: str, geometry: DisplayGeometry) -> MouseTrack:
    return MouseTrack.from_samples(
        scripted_screen_samples(video_id, geometry),
        viewer_id="scripted",
        video_id=video_id,
        space=SCREEN_SPACE,
        geometry=geometry,
    )


def default_geometry() -> DisplayGeometry:
    return DisplayGeometry(SCREEN_W, SCREEN_H, aspect_fit_rect(SCREEN_W, SCREEN_H, VIDEO_W, VIDEO_H))


def build_validation_refs(config: PipelineConfig) -> dict[str, list]:
    """Reference maps on the untrimmed timeline for the scripted path.

    Built with the pipeline's shift but no trim, so a viewer reproducing the
    path scores CC = 1.0 under the full pipeline.
    """
    geometry = default_geometry()
    refs = {}
    for vid in VALIDATION_IDS:
        video = corpus_meta()[vid]
        track = scripted_track(vid, geometry)
        processed = pipeline.process_track(track, video, config, trim_ms=0.0)
        fixations = pipeline.assign_fixations_to_frames([processed], video, video.frame_count)
        refs[vid] = pipeline.render_video_saliency(
            fixations, video, pipeline.effective_sigma(config.render_sigma_px, video)
        )
    return refs


def write_refs_dir(refs: dict[str, list], refs_dir: Path) -> None:
    for vid, frames in refs.items():
        trackio.write_map_dir(Path(refs_dir) / vid, frames)


def reaction_follow_samples(trajectory: RectTrajectory, step_ms: float = 50.0) -> list[list[float]]:
    """Cursor glued to the rectangle center for a full attempt."""
    samples = []
    t = 0.0
    while t <= trajectory.period_ms:
        ox, oy = trajectory.origin_at(t)
        samples.append([t, ox + trajectory.rect_w / 2.0, oy + trajectory.rect_h / 2.0])
        t += step_ms
    return samples


def reaction_idle_samples(trajectory: RectTrajectory) -> list[list[float]]:
    """Cursor parked at the screen center (never inside the border rect)."""
    return [[0.0, trajectory.screen_w / 2.0, trajectory.screen_h / 2.0]]


WORD_FOR_DIGIT = {v: k for k, v in SYNONYMS["en"].items()}


@dataclass
class ScriptedViewer:
    """Drives the HTTP protocol like the browser client would."""

    client: object  # httpx-compatible client
    screen_w: int = SCREEN_W
    screen_h: int = SCREEN_H
    locale: str = "en"
    spell_out_captchas: bool = False  # answer "seven" instead of "7"

    def run_full_session(self, rating: int = 4) -> dict:
        r = self.client.post(
            "/api/v1/session",
            json={"screen_w": self.screen_w, "screen_h": self.screen_h, "locale": self.locale},
        )
        assert r.status_code == 200, r.text
        session = r.json()
        sid = session["session_id"]
        trajectory = RectTrajectory(**session["reaction"])

        attempts = [{"samples": reaction_follow_samples(trajectory)} for _ in range(3)]
        r = self.client.post(f"/api/v1/session/{sid}/reaction", json={"attempts": attempts})
        assert r.status_code == 200 and r.json()["pass"], r.text

        self.answer_captcha(session, "start")
        for i, entry in enumerate(session["playlist"], start=1):
            if i == 13:
                self.answer_captcha(session, "middle")
            self.upload_view(session, entry["video_id"], rating)
        return session

    def answer_captcha(self, session: dict, checkpoint: str) -> None:
        clip_id = session["captcha_clips"][checkpoint]["clip_id"]
        answer = CAPTCHA_ANSWERS[clip_id]
        if self.spell_out_captchas:
            answer = WORD_FOR_DIGIT[answer]
        r = self.client.post(
            f"/api/v1/session/{session['session_id']}/captcha",
            json={"checkpoint": checkpoint, "answer": answer},
        )
        assert r.status_code == 200 and r.json()["pass"], r.text

    def upload_view(self, session: dict, video_id: str, rating: int = 4) -> dict:
        geometry = DisplayGeometry(
            self.screen_w, self.screen_h, aspect_fit_rect(self.screen_w, self.screen_h, VIDEO_W, VIDEO_H)
        )
        rect = geometry.video_rect
        r = self.client.post(
            f"/api/v1/session/{session['session_id']}/view",
            json={
                "video_id": video_id,
                "rating": rating,
                "samples": scripted_screen_samples(video_id, geometry),
                "video_rect": {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h},
            },
        )
        assert r.status_code == 200, r.text
        return r.json()


def make_service_config(store_dir: Path, seed: int = 0, videos_dir: Path | None = None) -> ServiceConfig:
    return ServiceConfig(
        store=SessionStore(store_dir),
        meta=corpus_meta(),
        content_ids=CONTENT_IDS,
        validation_ids=VALIDATION_IDS,
        captcha_clips=CAPTCHA_CLIPS,
        synonyms=SYNONYMS,
        videos_dir=videos_dir,
        seed=seed,
    )


@pytest.fixture
def service_config(tmp_path):
    return make_service_config(tmp_path / "store")


@pytest.fixture
def app_client(service_config):
    from fastapi.testclient import TestClient

    app = create_app(service_config)
    with TestClient(app) as client:
        yield client, service_config
