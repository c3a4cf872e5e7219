"""File formats: track files, fixation files, saliency PNGs, video metadata.

Track file layout (UTF-8, LF line endings):

    viewer_id,video_id,space,screen_w,screen_h,rect_x,rect_y,rect_w,rect_h
    t_ms,x,y
    t_ms,x,y
    ...

The first line is the metadata record itself (values, not column names).
Numbers are written in canonical form: integral values without a decimal
point, everything else as the shortest round-tripping float literal.
"""

from __future__ import annotations

import io
import math
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .types import (
    SPACES,
    DisplayGeometry,
    FrameFixations,
    MouseTrack,
    ParseError,
    SaliencyFrame,
    ValidationError,
    VideoMeta,
    VideoRect,
)

FRAME_NAME_FORMAT = "%06d.png"
_VIDEO_SUFFIXES = (".mp4", ".mkv", ".avi", ".webm", ".mov", ".y4m")


def _fmt_num(v: float) -> str:
    f = float(v)
    if math.isfinite(f) and f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _parse_num(s: str, line_no: int, what: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"line {line_no}: invalid {what} {s!r}") from None


# ---------------------------------------------------------------------------
# Track files
# ---------------------------------------------------------------------------


def save_track(track: MouseTrack) -> bytes:
    if track.geometry is None:
        raise ValidationError("track has no display geometry; cannot write header")
    g = track.geometry
    r = g.video_rect
    header = ",".join(
        [
            track.viewer_id,
            track.video_id,
            track.space,
            _fmt_num(g.screen_w),
            _fmt_num(g.screen_h),
            _fmt_num(r.x),
            _fmt_num(r.y),
            _fmt_num(r.w),
            _fmt_num(r.h),
        ]
    )
    lines = [header]
    for t, x, y in zip(track.t_ms, track.x, track.y):
        lines.append(f"{_fmt_num(t)},{_fmt_num(x)},{_fmt_num(y)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_track(data: bytes) -> MouseTrack:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"track file is not valid UTF-8 at byte {e.start}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("line 1: empty track file")

    head = lines[0].split(",")
    if len(head) != 9:
        raise ParseError(f"line 1: expected 9 header fields, got {len(head)}")
    viewer_id, video_id, space = head[0], head[1], head[2]
    if space not in SPACES:
        raise ParseError(f"line 1: unknown coordinate space {space!r}")
    nums = [_parse_num(s, 1, "header number") for s in head[3:]]
    geometry = DisplayGeometry(
        screen_w=int(nums[0]),
        screen_h=int(nums[1]),
        video_rect=VideoRect(nums[2], nums[3], nums[4], nums[5]),
    )
    geometry.validate()

    n = len(lines) - 1
    t = np.empty(n, dtype=np.float64)
    x = np.empty(n, dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"line {i}: expected 3 fields, got {len(parts)}")
        t[i - 2] = _parse_num(parts[0], i, "timestamp")
        x[i - 2] = _parse_num(parts[1], i, "x coordinate")
        y[i - 2] = _parse_num(parts[2], i, "y coordinate")

    track = MouseTrack(viewer_id, video_id, space, t, x, y, geometry)
    track.validate()
    return track


def write_track_file(path: Path, track: MouseTrack) -> None:
    path.write_bytes(save_track(track))


def read_track_file(path: Path) -> MouseTrack:
    return load_track(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Fixation files
# ---------------------------------------------------------------------------


def save_fixations(frames: Sequence[FrameFixations]) -> bytes:
    out = io.StringIO()
    for frame in frames:
        for x, y in frame.xy:
            out.write(f"{frame.frame_index},{int(x)},{int(y)}\n")
    return out.getvalue().encode("utf-8")


def load_fixations(data: bytes, n_frames: int | None = None) -> list[FrameFixations]:
    by_frame: dict[int, list[tuple[int, int]]] = {}
    text = data.decode("utf-8")
    for i, line in enumerate(text.split("\n"), start=1):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"line {i}: expected frame_index,x,y")
        try:
            idx, x, y = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError(f"line {i}: non-integer fixation field") from None
        if idx < 0:
            raise ParseError(f"line {i}: negative frame index")
        by_frame.setdefault(idx, []).append((x, y))
    count = n_frames if n_frames is not None else (max(by_frame) + 1 if by_frame else 0)
    return [FrameFixations.from_points(i, by_frame.get(i, [])) for i in range(count)]


def write_fixation_file(path: Path, frames: Sequence[FrameFixations]) -> None:
    path.write_bytes(save_fixations(frames))


def read_fixation_file(path: Path, n_frames: int | None = None) -> list[FrameFixations]:
    return load_fixations(Path(path).read_bytes(), n_frames)


# ---------------------------------------------------------------------------
# Saliency maps (8-bit grayscale PNG, one file per frame)
# ---------------------------------------------------------------------------


def quantize_frame(frame: SaliencyFrame | np.ndarray) -> np.ndarray:
    """Map to uint8 so the frame maximum lands on 255 (all-zero stays zero).

    Rounding is half away from zero.
    """
    values = frame.values if isinstance(frame, SaliencyFrame) else np.asarray(frame, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot quantize a zero-sized frame")
    peak = float(values.max())
    if peak <= 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.floor(values * (255.0 / peak) + 0.5).astype(np.uint8)


def save_saliency_frame(frame: SaliencyFrame | np.ndarray) -> bytes:
    img = Image.fromarray(quantize_frame(frame), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def load_saliency_frame(data: bytes) -> SaliencyFrame:
    img = Image.open(io.BytesIO(data))
    if img.mode != "L":
        img = img.convert("L")
    return SaliencyFrame(np.asarray(img, dtype=np.float64))


def write_map_dir(dirpath: Path, frames: Iterable[SaliencyFrame | np.ndarray]) -> int:
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    n = 0
    for i, frame in enumerate(frames):
        (dirpath / (FRAME_NAME_FORMAT % i)).write_bytes(save_saliency_frame(frame))
        n += 1
    return n


def _map_dir_files(dirpath: Path) -> list[Path]:
    files = sorted(p for p in Path(dirpath).iterdir() if re.fullmatch(r"\d{6}\.png", p.name))
    if not files:
        raise ParseError(f"{dirpath}: no frame PNGs found")
    for i, p in enumerate(files):
        if int(p.stem) != i:
            raise ParseError(f"{dirpath}: frame files are not contiguous at {p.name}")
    return files


def read_map_dir(dirpath: Path) -> list[SaliencyFrame]:
    return [load_saliency_frame(p.read_bytes()) for p in _map_dir_files(dirpath)]


def count_map_frames(source: Path) -> int:
    source = Path(source)
    if source.is_dir():
        return len(_map_dir_files(source))
    return sum(1 for _ in iter_map_source(source))


def iter_map_source(source: Path):
    """Yield SaliencyFrame from a directory of PNGs or a grayscale video file."""
    source = Path(source)
    if source.is_dir():
        for p in _map_dir_files(source):
            yield load_saliency_frame(p.read_bytes())
        return
    if source.suffix.lower() not in _VIDEO_SUFFIXES:
        raise ParseError(f"{source}: not a map directory or a known video container")
    try:
        import cv2
    except ImportError as e:
        raise ParseError(f"{source}: reading video streams requires opencv-python") from e
    cap = cv2.VideoCapture(str(source))
    if not cap.isOpened():
        raise ParseError(f"{source}: cannot open video stream")
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            if frame.ndim == 3:
                frame = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
            yield SaliencyFrame(frame.astype(np.float64))
    finally:
        cap.release()


def read_map_source(source: Path) -> list[SaliencyFrame]:
    return list(iter_map_source(source))


# ---------------------------------------------------------------------------
# Video metadata CSV
# ---------------------------------------------------------------------------

META_COLUMNS = ("video_id", "width", "height", "fps", "duration_ms", "has_audio", "subset")


def save_video_meta_csv(videos: Sequence[VideoMeta]) -> bytes:
    lines = [",".join(META_COLUMNS)]
    for v in videos:
        lines.append(
            ",".join(
                [
                    v.video_id,
                    str(v.width),
                    str(v.height),
                    _fmt_num(v.fps),
                    _fmt_num(v.duration_ms),
                    "1" if v.has_audio else "0",
                    v.subset,
                ]
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_video_meta_csv(data: bytes) -> list[VideoMeta]:
    text = data.decode("utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise ParseError("line 1: empty metadata file")
    header = tuple(lines[0].split(","))
    if header != META_COLUMNS:
        raise ParseError(f"line 1: expected header {','.join(META_COLUMNS)}")
    videos = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(META_COLUMNS):
            raise ParseError(f"line {i}: expected {len(META_COLUMNS)} fields")
        meta = VideoMeta(
            video_id=parts[0],
            width=int(_parse_num(parts[1], i, "width")),
            height=int(_parse_num(parts[2], i, "height")),
            fps=_parse_num(parts[3], i, "fps"),
            duration_ms=_parse_num(parts[4], i, "duration"),
            has_audio=parts[5] not in ("0", "false", ""),
            subset=parts[6],
        )
        meta.validate()
        videos.append(meta)
    return videos


def read_video_meta_csv(path: Path) -> dict[str, VideoMeta]:
    videos = load_video_meta_csv(Path(path).read_bytes())
    out: dict[str, VideoMeta] = {}
    for v in videos:
        if v.video_id in out:
            raise ParseError(f"duplicate video id {v.video_id}")
        out[v.video_id] = v
    return out
