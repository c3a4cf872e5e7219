"""Participant and view quality gates.

Gates: minimum screen size, the moving-rectangle reaction test, audio
captcha answers, per-view cursor event rate, and agreement (CC) with
eye-tracking references on the hidden validation videos.

A failed frequency check flags the single view; every other failed gate
rejects the participant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pipeline import (
    assign_fixations_to_frames,
    effective_sigma,
    process_track,
    render_video_saliency,
    track_frequency,
)
from .types import (
    DisplayGeometry,
    MouseTrack,
    PipelineConfig,
    SaliencyFrame,
    ValidationError,
    VideoMeta,
)

REACTION_PERIOD_MS = 7000.0
REACTION_ATTEMPT_COUNT = 3
REACTION_PASS_FRACTION = 0.30

CHECKPOINT_START = "start"
CHECKPOINT_MIDDLE = "middle"

_CORNER_OFFSETS = ("top_left", "top_right", "bottom_right", "bottom_left")


@dataclass(frozen=True)
class RectTrajectory:
    """Rectangle sliding along the inside of the screen border at constant
    speed, one full loop per period."""

    screen_w: float
    screen_h: float
    rect_w: float
    rect_h: float
    period_ms: float = REACTION_PERIOD_MS
    start_corner: str = "top_left"
    clockwise: bool = True

    def __post_init__(self) -> None:
        if self.rect_w > self.screen_w or self.rect_h > self.screen_h:
            raise ValidationError("rectangle larger than screen")
        if self.start_corner not in _CORNER_OFFSETS:
            raise ValidationError(f"unknown corner {self.start_corner!r}")
        if self.period_ms <= 0:
            raise ValidationError("period must be positive")

    @property
    def travel(self) -> tuple[float, float]:
        return (self.screen_w - self.rect_w, self.screen_h - self.rect_h)

    @property
    def path_length(self) -> float:
        a, b = self.travel
        return 2.0 * (a + b)

    def _corner_distance(self, corner: str) -> float:
        a, b = self.travel
        return {"top_left": 0.0, "top_right": a, "bottom_right": a + b, "bottom_left": 2 * a + b}[corner]

    def _pos_at_distance(self, d: float) -> tuple[float, float]:
        a, b = self.travel
        length = self.path_length
        d = d % length if length > 0 else 0.0
        if d < a:
            return (d, 0.0)
        if d < a + b:
            return (a, d - a)
        if d < 2 * a + b:
            return (a - (d - a - b), b)
        return (0.0, b - (d - 2 * a - b))

    def origin_at(self, t_ms: float) -> tuple[float, float]:
        """Top-left corner of the rectangle at time t."""
        length = self.path_length
        if length == 0.0:
            return (0.0, 0.0)
        d0 = self._corner_distance(self.start_corner)
        step = length * (t_ms / self.period_ms)
        d = d0 + step if self.clockwise else d0 - step
        return self._pos_at_distance(d)

    def segment_crossings(self, duration_ms: float) -> list[float]:
        """Times in (0, duration) where the motion changes direction."""
        a, b = self.travel
        length = self.path_length
        if length == 0.0:
            return []
        d0 = self._corner_distance(self.start_corner)
        speed = length / self.period_ms
        times = []
        for corner_d in (0.0, a, a + b, 2 * a + b):
            # d0 +/- speed*t == corner_d (mod length)
            delta = (corner_d - d0) % length if self.clockwise else (d0 - corner_d) % length
            t = delta / speed
            while t <= duration_ms:
                if 0.0 < t < duration_ms:
                    times.append(t)
                t += self.period_ms  # one lap per period
        return sorted(times)

    def contains(self, t_ms: float, x: float, y: float) -> bool:
        ox, oy = self.origin_at(t_ms)
        return ox <= x <= ox + self.rect_w and oy <= y <= oy + self.rect_h


@dataclass(frozen=True)
class ReactionAttempt:
    trajectory: RectTrajectory
    t_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray
    duration_ms: float = REACTION_PERIOD_MS

    @classmethod
    def from_samples(cls, trajectory: RectTrajectory, samples, duration_ms: float = REACTION_PERIOD_MS):
        arr = np.asarray([(s[0], s[1], s[2]) for s in samples], dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        return cls(trajectory, arr[:, 0], arr[:, 1], arr[:, 2], duration_ms)


def _axis_window(p: float, v: float, lo: float, hi: float, span: float) -> tuple[float, float]:
    """Sub-interval of [0, span] where lo <= p + v*tau <= hi."""
    if v == 0.0:
        return (0.0, span) if lo <= p <= hi else (0.0, -1.0)
    t1 = (lo - p) / v
    t2 = (hi - p) / v
    if t1 > t2:
        t1, t2 = t2, t1
    return (max(0.0, t1), min(span, t2))


def score_reaction_attempt(attempt: ReactionAttempt) -> float:
    """Fraction of the attempt the cursor spends inside the moving rectangle.

    The cursor holds its last reported position between samples; before the
    first sample it is nowhere (counts as outside).  Integration is exact
    over the piecewise-linear rectangle motion.
    """
    if len(attempt.t_ms) == 0:
        return 0.0
    traj = attempt.trajectory
    dur = attempt.duration_ms
    events = {0.0, dur}
    events.update(float(t) for t in attempt.t_ms if 0.0 < t < dur)
    events.update(traj.segment_crossings(dur))
    times = sorted(events)

    sample_t = attempt.t_ms
    inside = 0.0
    for e0, e1 in zip(times, times[1:]):
        span = e1 - e0
        if span <= 0:
            continue
        k = int(np.searchsorted(sample_t, e0, side="right")) - 1
        if k < 0:
            continue
        cx = float(attempt.x[k])
        cy = float(attempt.y[k])
        ox0, oy0 = traj.origin_at(e0)
        ox1, oy1 = traj.origin_at(e1)
        vx = (ox1 - ox0) / span
        vy = (oy1 - oy0) / span
        wx0, wx1 = _axis_window(ox0, vx, cx - traj.rect_w, cx, span)
        wy0, wy1 = _axis_window(oy0, vy, cy - traj.rect_h, cy, span)
        lo = max(wx0, wy0)
        hi = min(wx1, wy1)
        if hi > lo:
            inside += hi - lo
    return inside / dur


def score_reaction_test(attempts: list[ReactionAttempt], threshold: float = REACTION_PASS_FRACTION) -> tuple[bool, float]:
    """Pass when the best of the three attempts reaches the threshold."""
    if len(attempts) != REACTION_ATTEMPT_COUNT:
        raise ValidationError(f"expected {REACTION_ATTEMPT_COUNT} attempts, got {len(attempts)}")
    best = max(score_reaction_attempt(a) for a in attempts)
    return best >= threshold, best


def check_screen(geom: DisplayGeometry, min_screen: tuple[int, int] = (1280, 720)) -> bool:
    return geom.screen_w >= min_screen[0] and geom.screen_h >= min_screen[1]


def normalize_answer(s: str) -> str:
    return " ".join(s.casefold().split())


def verify_captcha(expected: str, given: str, synonyms: dict[str, str] | None = None) -> bool:
    """Compare after case folding, trimming, and whitespace collapsing.

    The synonym table maps spelled-out tokens to their digit form per
    locale, so "seven" can match an expected "7".
    """
    if not expected:
        raise ValidationError("expected captcha answer is empty")
    table = {normalize_answer(k): normalize_answer(v) for k, v in (synonyms or {}).items()}

    def canon(s: str) -> str:
        return " ".join(table.get(tok, tok) for tok in normalize_answer(s).split())

    return canon(given) == canon(expected)


def check_view_frequency(track: MouseTrack, min_hz: float = 3.0) -> bool:
    return track_frequency(track) >= min_hz


def validation_cc(
    track: MouseTrack,
    video: VideoMeta,
    reference_frames: list[SaliencyFrame],
    config: PipelineConfig,
) -> float:
    """Frame-mean CC of one viewer's rendered track against reference maps.

    References live on the untrimmed timeline; zero-variance frames are
    skipped.  NaN when no frame has a defined CC.
    """
    processed = process_track(track, video, config)
    if processed is None:
        return float("nan")
    offset = int(round(config.trim_ms * video.fps / 1000.0))
    n_frames = len(reference_frames) - offset
    if n_frames <= 0:
        return float("nan")
    fixations = assign_fixations_to_frames([processed], video, n_frames)
    maps = render_video_saliency(fixations, video, effective_sigma(config.render_sigma_px, video))
    scores = []
    for i, rendered in enumerate(maps):
        score = kernels.pearson(rendered.values, reference_frames[i + offset].values)
        if not math.isnan(score):
            scores.append(score)
    if not scores:
        return float("nan")
    return math.fsum(scores) / len(scores)


def check_validation_videos(
    tracks_by_video: dict[str, MouseTrack],
    videos: dict[str, VideoMeta],
    references: dict[str, list[SaliencyFrame]],
    threshold: float = 0.35,
    config: PipelineConfig | None = None,
) -> tuple[dict[str, float], bool]:
    """Per-validation-video CC and the all-videos-pass verdict."""
    if not tracks_by_video:
        raise ValidationError("no validation videos to check")
    config = config or PipelineConfig()
    per_video: dict[str, float] = {}
    for video_id, track in tracks_by_video.items():
        if video_id not in references:
            raise ValidationError(f"missing validation references for {video_id}")
        per_video[video_id] = validation_cc(track, videos[video_id], references[video_id], config)
    ok = all(not math.isnan(v) and v >= threshold for v in per_video.values())
    return per_video, ok


# ---------------------------------------------------------------------------
# Whole-session QC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaptchaRecord:
    checkpoint: str
    expected: str
    answers: tuple[str, ...]


@dataclass(frozen=True)
class ViewRecord:
    video_id: str
    is_validation: bool
    rating: int
    track: MouseTrack


@dataclass(frozen=True)
class SessionData:
    """Everything QC needs about one finalized session, raw enough that all
    gates can be recomputed offline."""

    viewer_id: str
    geometry: DisplayGeometry
    reaction_attempts: tuple[ReactionAttempt, ...]
    captchas: tuple[CaptchaRecord, ...]
    views: tuple[ViewRecord, ...]
    synonyms: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ViewQc:
    video_id: str
    frequency_hz: float
    frequency_ok: bool


@dataclass(frozen=True)
class QcReport:
    viewer_id: str
    screen_ok: bool
    reaction_ok: bool
    reaction_best_fraction: float
    captcha_start_ok: bool
    captcha_middle_ok: bool
    views: tuple[ViewQc, ...]
    validation_cc: dict[str, float]
    validation_ok: bool
    overall_pass: bool

    def accepted_view_ids(self) -> list[str]:
        """Content views usable for ground truth: session passed and the
        individual view was not frequency-flagged."""
        if not self.overall_pass:
            return []
        return [v.video_id for v in self.views if v.frequency_ok]


def _captcha_ok(records: tuple[CaptchaRecord, ...], checkpoint: str, synonyms: dict[str, str]) -> bool:
    for rec in records:
        if rec.checkpoint == checkpoint:
            return any(verify_captcha(rec.expected, a, synonyms) for a in rec.answers)
    return False


def qc_session(
    session: SessionData,
    references: dict[str, list[SaliencyFrame]],
    videos: dict[str, VideoMeta],
    config: PipelineConfig | None = None,
) -> QcReport:
    """Run every gate over a finalized session.

    overall_pass is the conjunction of the participant gates; frequency
    failures only exclude the affected view.
    """
    config = config or PipelineConfig()
    screen_ok = check_screen(session.geometry, config.min_screen)
    if len(session.reaction_attempts) == REACTION_ATTEMPT_COUNT:
        reaction_ok, best = score_reaction_test(list(session.reaction_attempts))
    else:
        reaction_ok, best = False, 0.0
    captcha_start_ok = _captcha_ok(session.captchas, CHECKPOINT_START, session.synonyms)
    captcha_middle_ok = _captcha_ok(session.captchas, CHECKPOINT_MIDDLE, session.synonyms)

    view_qc = []
    for view in session.views:
        if not view.is_validation:
            hz = track_frequency(view.track)
            view_qc.append(ViewQc(view.video_id, hz, hz >= config.min_track_hz))

    validation_tracks = {v.video_id: v.track for v in session.views if v.is_validation}
    if not validation_tracks:
        raise ValidationError(f"{session.viewer_id}: session has no validation views")
    missing = sorted(set(validation_tracks) - set(references))
    if missing:
        raise ValidationError(f"missing validation references for {missing}")
    val_cc, validation_ok = check_validation_videos(
        validation_tracks, videos, references, config.validation_cc_threshold, config
    )

    overall = screen_ok and reaction_ok and captcha_start_ok and captcha_middle_ok and validation_ok
    return QcReport(
        viewer_id=session.viewer_id,
        screen_ok=screen_ok,
        reaction_ok=reaction_ok,
        reaction_best_fraction=best,
        captcha_start_ok=captcha_start_ok,
        captcha_middle_ok=captcha_middle_ok,
        views=tuple(view_qc),
        validation_cc=val_cc,
        validation_ok=validation_ok,
        overall_pass=overall,
    )
