"""Crowdsourced mouse-tracking attention toolkit: collection service,
ground-truth pipeline, saliency metrics, and leaderboard."""

from .types import (
    DisplayGeometry,
    FrameFixations,
    MouseTrack,
    PipelineConfig,
    SaliencyFrame,
    TrackSample,
    VideoMeta,
    VideoRect,
)

__version__ = "0.1.0"

__all__ = [
    "DisplayGeometry",
    "FrameFixations",
    "MouseTrack",
    "PipelineConfig",
    "SaliencyFrame",
    "TrackSample",
    "VideoMeta",
    "VideoRect",
    "__version__",
]
