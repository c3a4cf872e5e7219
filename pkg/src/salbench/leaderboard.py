"""Per-metric ranks, mean rank, and the final submission ordering.

All four metrics are higher-is-better.  Ranks use competition ranking
(1 + number of strictly greater values; exact ties share a rank).  The
final order sorts by mean rank; ties compare metric values in the listed
metric order, higher first, and fully tied entries keep their input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .metrics import METRIC_NAMES, MetricScores
from .types import ValidationError


@dataclass
class LeaderboardEntry:
    team: str
    scores: MetricScores
    per_metric_rank: tuple[int, int, int, int] = (0, 0, 0, 0)
    mean_rank: float = 0.0
    final_position: int = 0


def rank_metric(values: list[float]) -> list[int]:
    """Competition ranks: 1 + count of strictly greater values."""
    if not values:
        raise ValidationError("cannot rank an empty list")
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"non-finite metric value {v!r}")
    return [1 + sum(1 for w in values if w > v) for v in values]


def order_entries(entries: list[LeaderboardEntry]) -> list[LeaderboardEntry]:
    """Assign mean ranks and final positions; return the sorted entries."""
    if not entries:
        return []
    for metric_index, name in enumerate(METRIC_NAMES):
        ranks = rank_metric([e.scores.get(name) for e in entries])
        for e, r in zip(entries, ranks):
            pm = list(e.per_metric_rank)
            pm[metric_index] = r
            e.per_metric_rank = tuple(pm)
    for e in entries:
        e.mean_rank = math.fsum(e.per_metric_rank) / len(METRIC_NAMES)
    # sorted() is stable, so fully tied entries keep their input order
    ordered = sorted(entries, key=lambda e: (e.mean_rank,) + tuple(-v for v in e.scores.as_tuple()))
    for pos, e in enumerate(ordered, start=1):
        e.final_position = pos
    return ordered


def build_leaderboard(per_video_scores: dict[str, dict[str, MetricScores]]) -> list[LeaderboardEntry]:
    """Dataset means (equal video weight) -> ranks -> final ordering.

    ``per_video_scores`` maps team -> video_id -> per-video metric means.
    Every team must cover the identical video set.
    """
    if not per_video_scores:
        return []
    teams = sorted(per_video_scores)
    reference_videos = set(per_video_scores[teams[0]])
    for team in teams[1:]:
        videos = set(per_video_scores[team])
        if videos != reference_videos:
            diff = sorted(videos.symmetric_difference(reference_videos))
            raise ValidationError(f"video sets differ between submissions: {diff}")
    if not reference_videos:
        raise ValidationError("no videos to aggregate")

    entries = []
    for team in teams:
        table = per_video_scores[team]
        means = []
        for name in METRIC_NAMES:
            vals = [table[v].get(name) for v in sorted(table)]
            if any(math.isnan(v) for v in vals):
                bad = [v for v, s in zip(sorted(table), vals) if math.isnan(s)]
                raise ValidationError(f"{team}: metric {name} undefined on videos {bad}")
            means.append(math.fsum(vals) / len(vals))
        entries.append(LeaderboardEntry(team=team, scores=MetricScores(*means)))
    return order_entries(entries)


def render_table(entries: list[LeaderboardEntry]) -> str:
    """Human-readable table; mean ranks shown with 2 decimals."""
    headers = ("Team", "AUC-Judd", "CC", "SIM", "NSS", "Rank")
    rows = [
        (
            e.team,
            f"{e.scores.auc_judd:.3f}",
            f"{e.scores.cc:.3f}",
            f"{e.scores.sim:.3f}",
            f"{e.scores.nss:.3f}",
            f"{e.mean_rank:.2f}",
        )
        for e in entries
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"
