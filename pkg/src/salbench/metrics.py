"""Similarity metrics between predicted and ground-truth saliency.

Four scores are computed per frame: ROC area with thresholds at the
fixation-pixel saliency values (auc_judd), Pearson correlation (cc),
histogram intersection of the sum-normalized maps (sim), and the mean
standardized saliency at fixation pixels (nss).

Undefined frames (constant maps, zero-sum maps, no fixations) yield NaN and
are skipped by the per-video aggregation, which records the reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .types import FrameFixations, SaliencyFrame, ValidationError, as_map, fixation_array

METRIC_NAMES = ("auc_judd", "cc", "sim", "nss")


def cc(p, g) -> float:
    """Pearson correlation over pixels; NaN when either map is constant."""
    pv = as_map(p)
    gv = as_map(g)
    if pv.shape != gv.shape:
        raise ValidationError(f"shape mismatch {pv.shape} vs {gv.shape}")
    return kernels.pearson(pv, gv)


def sim(p, g) -> float:
    """Histogram intersection of the two maps normalized to unit sum."""
    pv = as_map(p)
    gv = as_map(g)
    if pv.shape != gv.shape:
        raise ValidationError(f"shape mismatch {pv.shape} vs {gv.shape}")
    ps = float(pv.sum())
    gs = float(gv.sum())
    if ps <= 0.0 or gs <= 0.0:
        return float("nan")
    return kernels.overlap(pv, gv, ps, gs)


def _fixation_flat_indices(p: np.ndarray, fixations) -> np.ndarray:
    """Unique flat pixel indices of the fixation set (a pixel counts once)."""
    xy = fixation_array(fixations)
    if xy.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    h, w = p.shape
    xs, ys = xy[:, 0], xy[:, 1]
    if np.any(xs < 0) or np.any(xs >= w) or np.any(ys < 0) or np.any(ys >= h):
        raise ValidationError("fixation outside the map")
    return np.unique(ys * w + xs)


def nss(p, fixations) -> float:
    """Mean standardized (zero mean, unit sample std) saliency at fixations."""
    pv = as_map(p)
    idx = _fixation_flat_indices(pv, fixations)
    if idx.size == 0:
        return float("nan")
    return kernels.standardized_mean_at(pv, idx)


def auc_judd(p, fixations) -> float:
    """ROC area; thresholds are the saliency values at fixation pixels.

    For threshold t: TPR = fixations scoring >= t over all fixations, FPR =
    non-fixated pixels scoring >= t over all non-fixated pixels.  The curve
    is augmented with (0,0) and (1,1) and integrated by the trapezoid rule.
    """
    pv = as_map(p)
    idx = _fixation_flat_indices(pv, fixations)
    n_fix = idx.size
    n_pix = pv.size
    if n_fix == 0 or n_fix == n_pix:
        return float("nan")
    flat = pv.ravel()
    fix_values = flat[idx]
    thresholds = np.unique(fix_values)  # ascending
    pix_ge = kernels.count_ge(flat, thresholds)
    fix_ge = kernels.count_ge(fix_values, thresholds)
    # descending thresholds give nondecreasing (FPR, TPR)
    tpr = (fix_ge / n_fix)[::-1]
    fpr = ((pix_ge - fix_ge) / (n_pix - n_fix))[::-1]
    tpr = np.concatenate(([0.0], tpr, [1.0]))
    fpr = np.concatenate(([0.0], fpr, [1.0]))
    return float(np.trapezoid(tpr, fpr))


def resize_prediction(p, target_w: int, target_h: int) -> SaliencyFrame:
    """Align-corners bilinear resize; preserves nonnegativity."""
    if target_w <= 0 or target_h <= 0:
        raise ValidationError("target size must be positive")
    pv = as_map(p)
    h, w = pv.shape
    if (w, h) == (target_w, target_h):
        return SaliencyFrame(pv.copy())
    out = _interp_axis(pv, target_h, axis=0)
    out = _interp_axis(out, target_w, axis=1)
    return SaliencyFrame(out)


def _interp_axis(values: np.ndarray, target: int, axis: int) -> np.ndarray:
    n = values.shape[axis]
    if target == n:
        return values
    if target == 1:
        coords = np.array([(n - 1) / 2.0])
    else:
        coords = np.arange(target, dtype=np.float64) * ((n - 1) / (target - 1))
    lo = np.floor(coords).astype(np.int64)
    np.clip(lo, 0, n - 2 if n > 1 else 0, out=lo)
    frac = coords - lo
    if n == 1:
        return np.repeat(values, target, axis=axis)
    a = np.take(values, lo, axis=axis)
    b = np.take(values, lo + 1, axis=axis)
    shape = [1, 1]
    shape[axis] = target
    f = frac.reshape(shape)
    return a * (1.0 - f) + b * f


@dataclass(frozen=True)
class MetricScores:
    auc_judd: float
    cc: float
    sim: float
    nss: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.auc_judd, self.cc, self.sim, self.nss)

    def get(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class VideoEvaluation:
    video_id: str
    per_frame: list[MetricScores]
    means: MetricScores
    frames_skipped: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.per_frame)

    def skipped_count(self, metric: str) -> int:
        return sum(self.frames_skipped.get(metric, {}).values())


def score_frame(pred, gt_map, gt_fix) -> MetricScores:
    pv = as_map(pred)
    gv = as_map(gt_map)
    if pv.shape != gv.shape:
        resized = resize_prediction(pv, gv.shape[1], gv.shape[0])
        pv = resized.values
    return MetricScores(
        auc_judd=auc_judd(pv, gt_fix),
        cc=cc(pv, gv),
        sim=sim(pv, gv),
        nss=nss(pv, gt_fix),
    )


def _skip_reason(metric: str, pred: np.ndarray, gt_map: np.ndarray, n_fix: int) -> str:
    if metric in ("auc_judd", "nss") and n_fix == 0:
        return "no_fixations"
    if metric == "auc_judd":
        return "all_pixels_fixated"
    if metric == "nss":
        return "constant_prediction"
    if metric == "cc":
        return "zero_variance"
    return "zero_sum"


def evaluate_video(
    video_id: str,
    pred_frames: list[SaliencyFrame | np.ndarray],
    gt_maps: list[SaliencyFrame | np.ndarray],
    gt_fixations: list[FrameFixations],
) -> VideoEvaluation:
    """Score a submission's frames for one video.

    Per-video means cover only frames where each metric is defined; the
    skip counts say why the others dropped out.
    """
    if len(pred_frames) != len(gt_maps):
        raise ValidationError(
            f"{video_id}: frame count mismatch: prediction has {len(pred_frames)}, "
            f"ground truth has {len(gt_maps)}"
        )
    if len(gt_fixations) != len(gt_maps):
        raise ValidationError(
            f"{video_id}: fixation/map frame count mismatch: {len(gt_fixations)} vs {len(gt_maps)}"
        )
    per_frame: list[MetricScores] = []
    skipped: dict[str, dict[str, int]] = {m: {} for m in METRIC_NAMES}
    sums = {m: [] for m in METRIC_NAMES}
    for pred, gt_map, gt_fix in zip(pred_frames, gt_maps, gt_fixations):
        scores = score_frame(pred, gt_map, gt_fix)
        per_frame.append(scores)
        for m in METRIC_NAMES:
            v = scores.get(m)
            if math.isnan(v):
                reason = _skip_reason(m, as_map(pred), as_map(gt_map), len(fixation_array(gt_fix)))
                skipped[m][reason] = skipped[m].get(reason, 0) + 1
            else:
                sums[m].append(v)
    means = MetricScores(
        **{m: (math.fsum(sums[m]) / len(sums[m]) if sums[m] else float("nan")) for m in METRIC_NAMES}
    )
    return VideoEvaluation(video_id, per_frame, means, {m: r for m, r in skipped.items() if r})
