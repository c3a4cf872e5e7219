"""Shared domain types and coordinate-space conventions.

Two coordinate spaces are used throughout:

* ``screen`` -- raw browser cursor coordinates, bounded by the participant's
  screen size.
* ``video`` -- native video-frame coordinates, bounded by the frame size.
  Continuous positions are kept in ``[0, w-1] x [0, h-1]`` (pixel centers).

Tracks move from screen space to video space exactly once, via
``pipeline.map_to_video_coords``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, NamedTuple

import numpy as np

SCREEN_SPACE = "screen"
VIDEO_SPACE = "video"
SPACES = (SCREEN_SPACE, VIDEO_SPACE)

# Landscape FullHD canvas that the render sigma and the center-prior canvas
# are defined against.
REFERENCE_WIDTH = 1920
REFERENCE_HEIGHT = 1080

SUBSETS = ("train", "public_test", "private_test")


class ValidationError(ValueError):
    """A domain object violates one of its invariants."""


class ParseError(ValueError):
    """Serialized input does not conform to its file format."""


class TrackSample(NamedTuple):
    t_ms: float
    x: float
    y: float


@dataclass(frozen=True)
class VideoRect:
    """Rectangle the video occupied on screen after aspect-preserving fit."""

    x: float
    y: float
    w: float
    h: float

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h


@dataclass(frozen=True)
class DisplayGeometry:
    screen_w: int
    screen_h: int
    video_rect: VideoRect

    def validate(self) -> None:
        if self.screen_w < 1 or self.screen_h < 1:
            raise ValidationError(f"screen size {self.screen_w}x{self.screen_h} invalid")
        r = self.video_rect
        if r.w <= 0 or r.h <= 0:
            raise ValidationError("video_rect has non-positive size")
        if r.x < 0 or r.y < 0 or r.x + r.w > self.screen_w or r.y + r.h > self.screen_h:
            raise ValidationError("video_rect not fully inside screen")

    def rect_matches_aspect(self, video_w: int, video_h: int, tol_px: float = 1.0) -> bool:
        """True when video_rect preserves the source aspect within rounding."""
        r = self.video_rect
        return (
            abs(r.h - r.w * video_h / video_w) <= tol_px
            or abs(r.w - r.h * video_w / video_h) <= tol_px
        )


def aspect_fit_rect(screen_w: int, screen_h: int, video_w: int, video_h: int) -> VideoRect:
    """Largest centered rectangle with the video's aspect inside the screen."""
    scale = min(screen_w / video_w, screen_h / video_h)
    w = round(video_w * scale)
    h = round(video_h * scale)
    return VideoRect(x=(screen_w - w) // 2, y=(screen_h - h) // 2, w=w, h=h)


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    width: int
    height: int
    duration_ms: float
    fps: float = 30.0
    has_audio: bool = True
    subset: str = "train"

    def validate(self) -> None:
        if self.width * self.height <= 0:
            raise ValidationError(f"{self.video_id}: zero-area frame")
        if self.fps <= 0:
            raise ValidationError(f"{self.video_id}: fps must be positive")
        if self.duration_ms <= 0:
            raise ValidationError(f"{self.video_id}: duration must be positive")
        if self.subset not in SUBSETS:
            raise ValidationError(f"{self.video_id}: unknown subset {self.subset!r}")

    @property
    def frame_count(self) -> int:
        return math.ceil(self.duration_ms * self.fps / 1000.0)


@dataclass(frozen=True, eq=False)
class MouseTrack:
    """One viewer's cursor samples for one video, in a tagged coordinate space.

    Sample arrays are parallel float64 vectors; timestamps are milliseconds
    since playback start and strictly increasing.  The display geometry the
    track was captured under travels with it so the on-disk header can always
    be reconstructed.
    """

    viewer_id: str
    video_id: str
    space: str
    t_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray
    geometry: DisplayGeometry | None = None

    def __len__(self) -> int:
        return len(self.t_ms)

    def __iter__(self) -> Iterator[TrackSample]:
        for t, x, y in zip(self.t_ms, self.x, self.y):
            yield TrackSample(float(t), float(x), float(y))

    @property
    def samples(self) -> list[TrackSample]:
        return list(self)

    @property
    def span_ms(self) -> float:
        if len(self.t_ms) == 0:
            return 0.0
        return float(self.t_ms[-1] - self.t_ms[0])

    @classmethod
    def from_samples(
        cls,
        samples,
        viewer_id: str = "viewer",
        video_id: str = "video",
        space: str = VIDEO_SPACE,
        geometry: DisplayGeometry | None = None,
    ) -> "MouseTrack":
        arr = np.asarray([(s[0], s[1], s[2]) for s in samples], dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        return cls(viewer_id, video_id, space, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), geometry)

    def with_arrays(self, t_ms: np.ndarray, x: np.ndarray, y: np.ndarray, space: str | None = None) -> "MouseTrack":
        return replace(
            self,
            t_ms=np.asarray(t_ms, dtype=np.float64),
            x=np.asarray(x, dtype=np.float64),
            y=np.asarray(y, dtype=np.float64),
            space=space if space is not None else self.space,
        )

    def validate(self, video: VideoMeta | None = None) -> None:
        if self.space not in SPACES:
            raise ValidationError(f"unknown coordinate space {self.space!r}")
        if len(self.t_ms) == 0:
            raise ValidationError("track has no samples")
        if not (len(self.t_ms) == len(self.x) == len(self.y)):
            raise ValidationError("sample arrays have mismatched lengths")
        for name, arr in (("t", self.t_ms), ("x", self.x), ("y", self.y)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite {name} value in track")
        if self.t_ms[0] < 0:
            raise ValidationError("negative timestamp at sample 0")
        diffs = np.diff(self.t_ms)
        if np.any(diffs <= 0):
            idx = int(np.argmax(diffs <= 0)) + 1
            raise ValidationError(f"non-monotone timestamp at sample {idx}")
        if self.space == SCREEN_SPACE and self.geometry is not None:
            g = self.geometry
            if np.any(self.x < 0) or np.any(self.x > g.screen_w) or np.any(self.y < 0) or np.any(self.y > g.screen_h):
                bad = int(np.argmax((self.x < 0) | (self.x > g.screen_w) | (self.y < 0) | (self.y > g.screen_h)))
                raise ValidationError(f"out-of-bounds coordinate at sample {bad}")
        if self.space == VIDEO_SPACE and video is not None:
            if np.any(self.x < 0) or np.any(self.x > video.width - 1) or np.any(self.y < 0) or np.any(self.y > video.height - 1):
                bad = int(
                    np.argmax((self.x < 0) | (self.x > video.width - 1) | (self.y < 0) | (self.y > video.height - 1))
                )
                raise ValidationError(f"out-of-bounds coordinate at sample {bad}")


@dataclass(frozen=True, eq=False)
class FrameFixations:
    """All viewers' fixation points attributed to one video frame.

    ``xy`` is an (N, 2) int32 array of pixel coordinates; duplicates are kept
    (rendering is additive over the multiset).
    """

    frame_index: int
    xy: np.ndarray

    @classmethod
    def from_points(cls, frame_index: int, points) -> "FrameFixations":
        arr = np.asarray(list(points), dtype=np.int32)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        return cls(frame_index, arr)

    @classmethod
    def empty(cls, frame_index: int) -> "FrameFixations":
        return cls(frame_index, np.empty((0, 2), dtype=np.int32))

    @property
    def points(self) -> list[tuple[int, int]]:
        return [(int(x), int(y)) for x, y in self.xy]

    def __len__(self) -> int:
        return int(self.xy.shape[0])

    def validate(self, video: VideoMeta) -> None:
        if len(self) == 0:
            return
        xs, ys = self.xy[:, 0], self.xy[:, 1]
        if np.any(xs < 0) or np.any(xs >= video.width) or np.any(ys < 0) or np.any(ys >= video.height):
            raise ValidationError(f"fixation outside frame in frame {self.frame_index}")


@dataclass(frozen=True, eq=False)
class SaliencyFrame:
    """A W x H grid of nonnegative intensities (row-major, float64)."""

    values: np.ndarray

    @classmethod
    def zeros(cls, width: int, height: int) -> "SaliencyFrame":
        return cls(np.zeros((height, width), dtype=np.float64))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValidationError("saliency frame must be a non-empty 2-D grid")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("saliency frame contains non-finite values")
        if np.any(self.values < 0):
            raise ValidationError("saliency frame contains negative values")


def as_map(m) -> np.ndarray:
    """Accept a SaliencyFrame or a bare 2-D array and return float64 values."""
    values = m.values if isinstance(m, SaliencyFrame) else m
    return np.asarray(values, dtype=np.float64)


def fixation_array(f) -> np.ndarray:
    """Accept FrameFixations or an (N, 2) point array; return int64 (N, 2)."""
    xy = f.xy if isinstance(f, FrameFixations) else np.asarray(f)
    xy = np.asarray(xy, dtype=np.int64)
    if xy.size == 0:
        return xy.reshape(0, 2)
    return xy.reshape(-1, 2)


@dataclass(frozen=True)
class PipelineConfig:
    """Ground-truth pipeline constants, one field per collection parameter."""

    resample_hz: float = 100.0
    min_track_hz: float = 3.0
    shift_ms: float = 300.0
    trim_ms: float = 1000.0
    render_sigma_px: float = 38.4
    blur_sigma_fraction: float = 0.02
    validation_cc_threshold: float = 0.35
    min_screen: tuple[int, int] = (1280, 720)

    def __post_init__(self) -> None:
        # shift and trim may be zero (identity); everything else is positive
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "min_screen":
                if v[0] <= 0 or v[1] <= 0:
                    raise ValidationError("min_screen must be positive")
            elif f.name in ("shift_ms", "trim_ms"):
                if v < 0:
                    raise ValidationError(f"{f.name} must be nonnegative")
            elif v <= 0:
                raise ValidationError(f"{f.name} must be positive")
        if not (0 < self.blur_sigma_fraction <= 0.2):
            raise ValidationError("blur_sigma_fraction out of range (0, 0.2]")
        if not (-1 < self.validation_cc_threshold < 1):
            raise ValidationError("validation_cc_threshold out of range (-1, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "min_screen" in d:
            d = dict(d, min_screen=tuple(d["min_screen"]))
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "resample_hz": self.resample_hz,
            "min_track_hz": self.min_track_hz,
            "shift_ms": self.shift_ms,
            "trim_ms": self.trim_ms,
            "render_sigma_px": self.render_sigma_px,
            "blur_sigma_fraction": self.blur_sigma_fraction,
            "validation_cc_threshold": self.validation_cc_threshold,
            "min_screen": list(self.min_screen),
        }
