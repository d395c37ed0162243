"""End-to-end pipeline wiring: one config object, one orchestration call."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import DarkParams, extract_track
from .imaging import Frame
from .normalize import NormalizationParams, NormalizedUtterance, normalize_track
from .snake import PoiSet, SnakeParams, ellipse_ring, extract_pois, minimize
from .tracker import TrackerParams, track_sequence
from .classify import ClassifierParams


@dataclass(frozen=True)
class InitialEllipse:
    """Seed ring for contour localization (center and semi-axes, pixels)."""

    cx: float
    cy: float
    rx: float
    ry: float

    def __post_init__(self) -> None:
        if self.rx <= 0 or self.ry <= 0:
            raise ValueError("ellipse radii must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    """All stage parameters plus the localization seed and capture rate.

    ``ellipse`` None means a frame-relative default: centered, semi-axes at
    30% of each dimension, which encloses a roughly centered mouth.
    """

    snake: SnakeParams = field(default_factory=SnakeParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    dark: DarkParams = field(default_factory=DarkParams)
    normalization: NormalizationParams = field(default_factory=NormalizationParams)
    classifier: ClassifierParams = field(default_factory=ClassifierParams)
    ellipse: InitialEllipse | None = None
    fps: float = 25.0

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    def seed_ellipse(self, frame: Frame) -> InitialEllipse:
        if self.ellipse is not None:
            return self.ellipse
        return InitialEllipse(
            cx=frame.width / 2.0,
            cy=frame.height / 2.0,
            rx=0.3 * frame.width,
            ry=0.3 * frame.height,
        )


def median3(frame: Frame) -> Frame:
    """3x3 median filter (edges replicated); wipes impulse noise, keeps edges."""
    p = np.pad(frame.data, 1, mode="edge")
    h, w = frame.data.shape
    stack = np.stack([p[i : i + h, j : j + w] for i in range(3) for j in range(3)])
    return Frame(np.median(stack, axis=0))


def localize_pois(frame: Frame, config: PipelineConfig) -> PoiSet:
    """Fit the contour on one frame and project out the landmarks.

    The frame is median-filtered (twice) first: impulse-noise pixels carry
    strong gradients that trap contour vertices on their way to the mouth,
    and small noise clusters survive a single pass.
    """
    clean = median3(median3(frame))
    ell = config.seed_ellipse(frame)
    initial = ellipse_ring(ell.cx, ell.cy, ell.rx, ell.ry, config.snake.num_vertices)
    contour = minimize(clean, initial, config.snake)
    return extract_pois(contour)


def utterance_curves(
    frames: Sequence[Frame], config: PipelineConfig
) -> NormalizedUtterance:
    """Full per-utterance pipeline: localize, track, extract, normalize.

    Tracking runs on the raw frames (the voting matcher absorbs impulse
    noise by construction); feature extraction runs on median-filtered
    frames because dark-pixel counting has no such protection and stray
    pepper pixels would dominate the dark-area curve.
    """
    if not frames:
        raise ValueError("utterance has no frames")
    seed = localize_pois(frames[0], config)
    track = track_sequence(frames, seed, config.tracker)
    cleaned = [median3(f) for f in frames]
    features = extract_track(cleaned, track, config.dark, config.fps)
    return normalize_track(features, config.normalization)
