"""Raw cursor tracks to per-frame fixations and rendered saliency maps.

Processing order is fixed: map to video coordinates, resample, shift
earlier by the lag compensation, trim the lead-in, bin into frames, render.
The cursor trails the eyes, so shifting subtracts from the timestamps; a
sample recorded at t is attributed to the stimulus at t - shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .types import (
    REFERENCE_WIDTH,
    SCREEN_SPACE,
    VIDEO_SPACE,
    DisplayGeometry,
    FrameFixations,
    MouseTrack,
    PipelineConfig,
    SaliencyFrame,
    ValidationError,
    VideoMeta,
)

# Truncation radius for the rendering kernel, in sigmas.  exp(-18) ~ 1.5e-8
# per missed fixation keeps every pixel far inside the 1e-4 budget even for
# thousands of fixations.
KERNEL_RADIUS_SIGMAS = 6.0


def track_frequency(track: MouseTrack) -> float:
    """Mean sample rate in Hz over the track's time span; 0 when degenerate."""
    n = len(track)
    if n < 2:
        return 0.0
    span_s = (float(track.t_ms[-1]) - float(track.t_ms[0])) / 1000.0
    if span_s <= 0:
        return 0.0
    return (n - 1) / span_s


def resample_track(track: MouseTrack, rate_hz: float) -> MouseTrack:
    """Resample onto a uniform grid from the first to the last timestamp."""
    if len(track) < 2:
        raise ValidationError("track too short to resample")
    if rate_hz <= 0:
        raise ValidationError("resample rate must be positive")
    step = 1000.0 / rate_hz
    t0 = float(track.t_ms[0])
    t1 = float(track.t_ms[-1])
    n = int(math.floor((t1 - t0) / step + 1e-9)) + 1
    grid = t0 + step * np.arange(n, dtype=np.float64)
    x = np.interp(grid, track.t_ms, track.x)
    y = np.interp(grid, track.t_ms, track.y)
    return track.with_arrays(grid, x, y)


def map_to_video_coords(track: MouseTrack, geom: DisplayGeometry, video: VideoMeta) -> MouseTrack:
    """Screen coordinates to native video coordinates via the display rect.

    Positions outside the rect clamp to the nearest frame pixel, so outputs
    land in [0, w-1] x [0, h-1].
    """
    if track.space != SCREEN_SPACE:
        raise ValidationError(f"expected a screen-space track, got {track.space!r}")
    r = geom.video_rect
    if r.w == 0 or r.h == 0:
        raise ValidationError("video_rect has zero size")
    x = (track.x - r.x) * (video.width / r.w)
    y = (track.y - r.y) * (video.height / r.h)
    np.clip(x, 0.0, video.width - 1.0, out=x)
    np.clip(y, 0.0, video.height - 1.0, out=y)
    return track.with_arrays(track.t_ms, x, y, space=VIDEO_SPACE)


def apply_temporal_shift(track: MouseTrack, shift_ms: float) -> MouseTrack:
    """Attribute samples to earlier stimulus time; drop those before t=0."""
    if shift_ms < 0:
        raise ValidationError("shift must be nonnegative")
    t = track.t_ms - shift_ms
    keep = t >= 0
    return track.with_arrays(t[keep], track.x[keep], track.y[keep])


def trim_head(track: MouseTrack, trim_ms: float) -> MouseTrack:
    """Drop samples before trim_ms and rebase the remainder to t=0."""
    if trim_ms < 0:
        raise ValidationError("trim must be nonnegative")
    keep = track.t_ms >= trim_ms
    return track.with_arrays(track.t_ms[keep] - trim_ms, track.x[keep], track.y[keep])


def assign_fixations_to_frames(
    tracks: list[MouseTrack], video: VideoMeta, n_frames: int | None = None
) -> list[FrameFixations]:
    """Bin samples into frame intervals [i/fps, (i+1)/fps) and round to pixels."""
    if n_frames is None:
        n_frames = video.frame_count
    frame_points: list[list[tuple[int, int]]] = [[] for _ in range(n_frames)]
    for track in tracks:
        if track.space != VIDEO_SPACE:
            raise ValidationError(f"track for {track.video_id} is not in video space")
        if len(track) == 0:
            continue
        # (t*fps)/1000 is exact at integer frame boundaries (integer product,
        # integer-valued quotient), so inclusive-left binning never drifts
        idx = np.floor(track.t_ms * video.fps / 1000.0).astype(np.int64)
        # round half away from zero (coordinates are nonnegative), then clamp
        xs = np.minimum(np.floor(track.x + 0.5).astype(np.int64), video.width - 1)
        ys = np.minimum(np.floor(track.y + 0.5).astype(np.int64), video.height - 1)
        np.maximum(xs, 0, out=xs)
        np.maximum(ys, 0, out=ys)
        ok = (idx >= 0) & (idx < n_frames)
        for i, x, y in zip(idx[ok], xs[ok], ys[ok]):
            frame_points[i].append((int(x), int(y)))
    return [FrameFixations.from_points(i, pts) for i, pts in enumerate(frame_points)]


def gaussian_template(sigma_px: float, radius: int) -> np.ndarray:
    """(2r+1)^2 unit-peak Gaussian patch sampled at integer offsets."""
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    row = np.exp(-(offs**2) / (2.0 * sigma_px * sigma_px))
    return np.outer(row, row)


def kernel_radius(sigma_px: float) -> int:
    return int(math.ceil(KERNEL_RADIUS_SIGMAS * sigma_px))


def render_saliency(fixations: FrameFixations, video: VideoMeta, sigma_px: float) -> SaliencyFrame:
    """Sum of unit-peak Gaussians centered on the frame's fixations."""
    if sigma_px <= 0:
        raise ValidationError("sigma must be positive")
    out = np.zeros((video.height, video.width), dtype=np.float64)
    if len(fixations) > 0:
        radius = kernel_radius(sigma_px)
        template = gaussian_template(sigma_px, radius)
        kernels.splat_add(out, template, fixations.xy[:, 0], fixations.xy[:, 1], radius)
    return SaliencyFrame(out)


def render_video_saliency(
    frames: list[FrameFixations], video: VideoMeta, sigma_px: float
) -> list[SaliencyFrame]:
    if sigma_px <= 0:
        raise ValidationError("sigma must be positive")
    radius = kernel_radius(sigma_px)
    template = gaussian_template(sigma_px, radius)
    out = []
    for f in frames:
        values = np.zeros((video.height, video.width), dtype=np.float64)
        if len(f) > 0:
            kernels.splat_add(values, template, f.xy[:, 0], f.xy[:, 1], radius)
        out.append(SaliencyFrame(values))
    return out


def effective_sigma(base_sigma_px: float, video: VideoMeta) -> float:
    """Rendering sigma at the video's native width (base is at 1920)."""
    return base_sigma_px * video.width / REFERENCE_WIDTH


def process_track(
    track: MouseTrack,
    video: VideoMeta,
    config: PipelineConfig,
    geom: DisplayGeometry | None = None,
    shift_ms: float | None = None,
    trim_ms: float | None = None,
) -> MouseTrack | None:
    """Map, resample, shift, and trim one raw track.

    Returns None when nothing usable remains (too few samples to resample,
    or everything shifted/trimmed away).
    """
    if track.space == SCREEN_SPACE:
        g = geom if geom is not None else track.geometry
        if g is None:
            raise ValidationError("screen-space track without display geometry")
        track = map_to_video_coords(track, g, video)
    if len(track) < 2:
        return None
    track = resample_track(track, config.resample_hz)
    track = apply_temporal_shift(track, config.shift_ms if shift_ms is None else shift_ms)
    track = trim_head(track, config.trim_ms if trim_ms is None else trim_ms)
    if len(track) == 0:
        return None
    return track


def build_ground_truth(
    video: VideoMeta,
    raw_tracks: list[MouseTrack],
    geoms: list[DisplayGeometry] | None = None,
    config: PipelineConfig | None = None,
) -> tuple[list[FrameFixations], list[SaliencyFrame]]:
    """Full pipeline over all of a video's accepted views.

    The effective duration shrinks by the trim, so the output has
    ceil((duration - trim) * fps / 1000) frames.
    """
    config = config or PipelineConfig()
    if geoms is not None and len(geoms) != len(raw_tracks):
        raise ValidationError("geoms and raw_tracks length mismatch")
    processed = []
    for i, track in enumerate(raw_tracks):
        p = process_track(track, video, config, geom=geoms[i] if geoms is not None else None)
        if p is not None:
            processed.append(p)
    if not processed:
        raise ValidationError(f"{video.video_id}: no usable views")
    effective_ms = video.duration_ms - config.trim_ms
    if effective_ms <= 0:
        raise ValidationError(f"{video.video_id}: trim exceeds video duration")
    n_frames = math.ceil(effective_ms * video.fps / 1000.0)
    fixations = assign_fixations_to_frames(processed, video, n_frames)
    maps = render_video_saliency(fixations, video, effective_sigma(config.render_sigma_px, video))
    return fixations, maps


# ---------------------------------------------------------------------------
# Shift/trim calibration against reference (eye-tracking) map sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignmentCalibration:
    candidate_shifts_ms: tuple[float, ...]
    candidate_trims_ms: tuple[float, ...]
    best_shift_ms: float
    best_trim_ms: float
    score_grid: np.ndarray  # shape (len(shifts), len(trims)), mean CC

    @property
    def best_score(self) -> float:
        i = self.candidate_shifts_ms.index(self.best_shift_ms)
        j = self.candidate_trims_ms.index(self.best_trim_ms)
        return float(self.score_grid[i, j])


def _mean_cc_for_pair(
    tracks_by_video: dict[str, list[MouseTrack]],
    references: dict[str, list[SaliencyFrame]],
    videos: dict[str, VideoMeta],
    config: PipelineConfig,
    shift_ms: float,
    trim_ms: float,
) -> float:
    total = 0.0
    count = 0
    for video_id, tracks in tracks_by_video.items():
        video = videos[video_id]
        refs = references[video_id]
        processed = [
            p
            for p in (process_track(t, video, config, shift_ms=shift_ms, trim_ms=trim_ms) for t in tracks)
            if p is not None
        ]
        if not processed:
            continue
        # Reference maps live on the untrimmed video timeline; trimmed frame i
        # corresponds to reference frame i + trim/frame_duration.
        offset = int(round(trim_ms * video.fps / 1000.0))
        n_frames = max(0, len(refs) - offset)
        if n_frames == 0:
            continue
        fixations = assign_fixations_to_frames(processed, video, n_frames)
        maps = render_video_saliency(fixations, video, effective_sigma(config.render_sigma_px, video))
        for i, rendered in enumerate(maps):
            ref = refs[i + offset].values
            score = kernels.pearson(rendered.values, ref)
            if not math.isnan(score):
                total += score
                count += 1
    if count == 0:
        return float("nan")
    return total / count


def calibrate_alignment(
    tracks_by_video: dict[str, list[MouseTrack]],
    references: dict[str, list[SaliencyFrame]],
    videos: dict[str, VideoMeta],
    candidate_shifts_ms: list[float],
    candidate_trims_ms: list[float],
    config: PipelineConfig | None = None,
) -> AlignmentCalibration:
    """Grid search over (shift, trim): maximize frame-mean CC vs references.

    Ties break toward the smaller shift, then the smaller trim.
    """
    config = config or PipelineConfig()
    if not candidate_shifts_ms or not candidate_trims_ms:
        raise ValidationError("empty candidate list")
    if not tracks_by_video:
        raise ValidationError("no videos to calibrate on")
    missing = sorted(set(tracks_by_video) - set(references))
    if missing:
        raise ValidationError(f"missing reference maps for {missing}")
    if all(
        float(np.ptp(frame.values)) == 0.0 for vid in tracks_by_video for frame in references[vid]
    ):
        raise ValidationError("degenerate reference (zero variance)")

    grid = np.full((len(candidate_shifts_ms), len(candidate_trims_ms)), np.nan)
    best: tuple[float, float, float] | None = None  # (score, shift, trim)
    for i, shift in enumerate(candidate_shifts_ms):
        for j, trim in enumerate(candidate_trims_ms):
            score = _mean_cc_for_pair(tracks_by_video, references, videos, config, shift, trim)
            grid[i, j] = score
            if math.isnan(score):
                continue
            if (
                best is None
                or score > best[0]
                or (score == best[0] and (shift, trim) < (best[1], best[2]))
            ):
                best = (score, shift, trim)
    if best is None:
        raise ValidationError("degenerate reference (zero variance)")
    return AlignmentCalibration(
        candidate_shifts_ms=tuple(candidate_shifts_ms),
        candidate_trims_ms=tuple(candidate_trims_ms),
        best_shift_ms=best[1],
        best_trim_ms=best[2],
        score_grid=grid,
    )
