"""Per-frame mouth descriptors: corner distance, opening distance, dark area.

The dark-area measure thresholds the region of interest spanned by the four
landmarks with an adaptive cutoff (a fixed fraction of the mean luminance
inside the region) and sums, over the dark pixels, their distance to the
region midpoint — so it grows both with the dark extent and with how far the
darkness spreads from the mouth center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imaging import Frame, PixelPoint
from .snake import PoiSet
from .tracker import TrackResult


@dataclass(frozen=True)
class DarkParams:
    """Adaptive darkness threshold: cutoff = threshold_ratio * mean luminance."""

    threshold_ratio: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold_ratio < 1.0:
            raise ValueError("threshold ratio must lie strictly between 0 and 1")


def _orient(a: PixelPoint, b: PixelPoint, c: PixelPoint) -> float:
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def _segments_cross(p1: PixelPoint, p2: PixelPoint, q1: PixelPoint, q2: PixelPoint) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class RegionOfInterest:
    """Quadrilateral spanned by the four landmarks, in ring order.

    Vertex order is left corner, upper center, right corner, lower center;
    the polygon must be simple (non-self-intersecting).
    """

    polygon: tuple[PixelPoint, PixelPoint, PixelPoint, PixelPoint]

    def __post_init__(self) -> None:
        if len(self.polygon) != 4:
            raise ValueError("region polygon needs exactly 4 vertices")
        a, b, c, d = self.polygon
        if _segments_cross(a, b, c, d) or _segments_cross(b, c, d, a):
            raise ValueError("region polygon is self-intersecting")

    @classmethod
    def from_pois(cls, pois: PoiSet) -> "RegionOfInterest":
        return cls(
            polygon=(
                pois.left_corner,
                pois.upper_center,
                pois.right_corner,
                pois.lower_center,
            )
        )

    @property
    def midpoint(self) -> tuple[float, float]:
        xs = [p.x for p in self.polygon]
        ys = [p.y for p in self.polygon]
        return sum(xs) / 4.0, sum(ys) / 4.0


@dataclass(frozen=True)
class FrameFeatures:
    """The three descriptors of one frame plus dark-pixel bookkeeping."""

    dh: float  # corner-to-corner distance
    dv: float  # upper-to-lower center distance
    da: float  # summed midpoint distances of dark pixels
    dark_count: int
    s_dark: float  # threshold actually used

    def __post_init__(self) -> None:
        if self.dh <= 0 or self.dv < 0 or self.da < 0 or self.dark_count < 0:
            raise ValueError("invalid frame features")


@dataclass(frozen=True)
class FeatureTrack:
    """Per-frame features for a whole utterance."""

    frames: tuple[FrameFeatures, ...]
    fps: float

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("feature track must cover at least one frame")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    def __len__(self) -> int:
        return len(self.frames)

    def values(self) -> np.ndarray:
        """Feature matrix of shape (frames, 3) in dh, dv, da column order."""
        return np.array([[f.dh, f.dv, f.da] for f in self.frames], dtype=np.float64)


def distances(pois: PoiSet) -> tuple[float, float]:
    """Euclidean corner-to-corner and center-to-center distances."""
    dh = math.hypot(
        pois.right_corner.x - pois.left_corner.x,
        pois.right_corner.y - pois.left_corner.y,
    )
    dv = math.hypot(
        pois.lower_center.x - pois.upper_center.x,
        pois.lower_center.y - pois.upper_center.y,
    )
    return dh, dv


def interior_pixels(
    roi: RegionOfInterest, width: int, height: int
) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel centers strictly inside the polygon (even-odd rule)."""
    poly = roi.polygon
    xs_v = [p.x for p in poly]
    ys_v = [p.y for p in poly]
    x0 = max(min(xs_v), 0)
    x1 = min(max(xs_v), width - 1)
    y0 = max(min(ys_v), 0)
    y1 = min(max(ys_v), height - 1)
    if x1 < x0 or y1 < y0:
        return np.array([], dtype=int), np.array([], dtype=int)

    gy, gx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    gx = gx.ravel().astype(np.float64)
    gy = gy.ravel().astype(np.float64)
    inside = np.zeros(gx.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        xa, ya = poly[i]
        xb, yb = poly[(i + 1) % n]
        crosses = (ya > gy) != (yb > gy)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = xa + (gy - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (gx < x_at)
    return gx[inside].astype(int), gy[inside].astype(int)


def dark_threshold(frame: Frame, roi: RegionOfInterest, params: DarkParams) -> float:
    """Adaptive cutoff: threshold_ratio times the mean luminance in the region."""
    xs, ys = interior_pixels(roi, frame.width, frame.height)
    if len(xs) == 0:
        raise ValueError("region of interest contains no pixels")
    return params.threshold_ratio * float(frame.data[ys, xs].mean())


def dark_area(
    frame: Frame, roi: RegionOfInterest, params: DarkParams
) -> tuple[float, int]:
    """Summed midpoint distance over dark pixels, and how many there are.

    A pixel is dark when its luminance is at or below the adaptive cutoff.
    """
    xs, ys = interior_pixels(roi, frame.width, frame.height)
    if len(xs) == 0:
        raise ValueError("region of interest contains no pixels")
    lum = frame.data[ys, xs]
    cutoff = params.threshold_ratio * float(lum.mean())
    dark = lum <= cutoff
    mx, my = roi.midpoint
    da = float(np.hypot(xs[dark] - mx, ys[dark] - my).sum())
    return da, int(dark.sum())


def extract_frame(frame: Frame, pois: PoiSet, params: DarkParams) -> FrameFeatures:
    roi = RegionOfInterest.from_pois(pois)
    dh, dv = distances(pois)
    xs, ys = interior_pixels(roi, frame.width, frame.height)
    if len(xs) == 0:
        raise ValueError("region of interest contains no pixels")
    lum = frame.data[ys, xs]
    s_dark = params.threshold_ratio * float(lum.mean())
    dark = lum <= s_dark
    mx, my = roi.midpoint
    da = float(np.hypot(xs[dark] - mx, ys[dark] - my).sum())
    return FrameFeatures(dh=dh, dv=dv, da=da, dark_count=int(dark.sum()), s_dark=s_dark)


def extract_track(
    frames: Sequence[Frame], track: TrackResult, params: DarkParams, fps: float
) -> FeatureTrack:
    """Assemble the per-frame descriptors along a tracked sequence."""
    if len(track.poi_sets) != len(frames):
        raise ValueError("track does not cover every frame")
    feats = tuple(
        extract_frame(frame, pois, params)
        for frame, pois in zip(frames, track.poi_sets)
    )
    return FeatureTrack(frames=feats, fps=fps)
