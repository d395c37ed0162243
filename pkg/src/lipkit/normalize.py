"""Trim pauses from feature tracks and normalize the curves in time and scale.

Speakers pause before and after articulating, so steady head/tail frames are
dropped first. Every feature curve is then resampled by linear interpolation
to a fixed number of points, which makes utterances of different durations
comparable. Scale is removed by dividing the corner and opening distances by
their value on the first retained frame (mouth-size invariance) and the dark
measure by its curve maximum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .features import FeatureTrack

FEATURE_IDS = ("dh", "dv", "da")


@dataclass(frozen=True)
class NormalizationParams:
    num_points: int = 10  # samples per normalized curve
    trim_epsilon: float = 0.02  # relative per-frame change below which a frame is steady

    def __post_init__(self) -> None:
        if self.num_points < 2:
            raise ValueError("normalized curves need at least 2 points")
        if self.trim_epsilon <= 0:
            raise ValueError("trim epsilon must be positive")


@dataclass(frozen=True)
class NormalizedFeatureVector:
    """One feature's normalized curve plus the divisor that scaled it."""

    feature_id: str
    values: np.ndarray
    scale_basis: float

    def __post_init__(self) -> None:
        if self.feature_id not in FEATURE_IDS:
            raise ValueError(f"unknown feature id: {self.feature_id!r}")
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or len(arr) < 2:
            raise ValueError("normalized curve must be a 1-D series of >= 2 points")
        if not np.isfinite(arr).all():
            raise ValueError("normalized curve must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TrimRange:
    """Inclusive frame range kept after pause trimming."""

    start: int
    end: int
    speech_detected: bool = True

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError("invalid trim range")

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class NormalizedUtterance:
    """The three normalized curves of one utterance plus the trim that produced them."""

    dh: NormalizedFeatureVector
    dv: NormalizedFeatureVector
    da: NormalizedFeatureVector
    trim: TrimRange

    @property
    def vectors(self) -> tuple[NormalizedFeatureVector, ...]:
        return (self.dh, self.dv, self.da)

    def matrix(self) -> np.ndarray:
        """Stacked curves, shape (3, num_points), rows in dh/dv/da order."""
        return np.stack([v.values for v in self.vectors])


def derive_point_count(fps: float, duration_s: float) -> int:
    """Samples per curve from capture rate times utterance duration, floor 2."""
    if fps <= 0 or duration_s <= 0:
        raise ValueError("capture rate and duration must be positive")
    return max(2, int(round(fps * duration_s)))


def trim(track: FeatureTrack, params: NormalizationParams) -> TrimRange:
    """Drop the maximal steady prefix and suffix of a feature track.

    A frame transition is steady when every feature's relative change is
    below the trim epsilon. At least ``num_points`` frames are retained;
    if the active span is shorter, it is widened symmetrically. A fully
    steady track keeps a centered minimal window and is flagged.
    """
    values = track.values()
    n = len(values)
    if n < 3:
        raise ValueError("feature track too short to trim (need >= 3 frames)")

    prev = values[:-1]
    rel = np.abs(values[1:] - prev) / np.maximum(np.abs(prev), 1.0)
    active = (rel >= params.trim_epsilon).any(axis=1)  # one flag per transition

    min_len = min(params.num_points, n)
    if not active.any():
        start = (n - min_len) // 2
        return TrimRange(start=start, end=start + min_len - 1, speech_detected=False)

    idx = np.flatnonzero(active)
    start = int(idx[0])  # keep the frame where activity begins
    end = int(idx[-1]) + 1  # transition t covers frames t and t+1

    while end - start + 1 < min_len:
        if start > 0:
            start -= 1
        if end - start + 1 < min_len and end < n - 1:
            end += 1
        if start == 0 and end == n - 1:
            break
    return TrimRange(start=start, end=end, speech_detected=True)


def resample(values: Sequence[float] | np.ndarray, num_points: int) -> np.ndarray:
    """Piecewise-linear resampling to ``num_points`` samples, endpoints kept."""
    series = np.asarray(values, dtype=np.float64)
    if series.ndim != 1 or len(series) < 2:
        raise ValueError("resampling needs a 1-D series of >= 2 points")
    if num_points < 2:
        raise ValueError("need at least 2 output points")
    positions = np.linspace(0.0, len(series) - 1.0, num_points)
    return np.interp(positions, np.arange(len(series)), series)


def normalize_track(
    track: FeatureTrack, params: NormalizationParams
) -> NormalizedUtterance:
    """Trim, resample, and rescale all three feature curves of an utterance.

    Corner and opening distances divide by their first retained value; the
    dark measure divides by its curve maximum (sentinel divisor 1 when the
    curve is identically zero).
    """
    kept = trim(track, params)
    values = track.values()[kept.start : kept.end + 1]

    curves = {}
    for col, fid in enumerate(FEATURE_IDS):
        curve = resample(values[:, col], params.num_points)
        if fid in ("dh", "dv"):
            basis = float(curve[0])
            if basis <= 0.0:
                raise ValueError("degenerate mouth geometry: zero initial distance")
        else:
            basis = float(curve.max())
            if basis <= 0.0:
                basis = 1.0
        curves[fid] = NormalizedFeatureVector(
            feature_id=fid, values=curve / basis, scale_basis=basis
        )
    return NormalizedUtterance(
        dh=curves["dh"], dv=curves["dv"], da=curves["da"], trim=kept
    )


class FeatureCurveNormalizer(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`normalize_track`.

    Accepts a list of :class:`FeatureTrack` or of raw (frames, 3) arrays and
    returns an array of shape (n_utterances, 3, num_points).
    """

    def __init__(self, num_points: int = 10, trim_epsilon: float = 0.02):
        self.num_points = num_points
        self.trim_epsilon = trim_epsilon

    def fit(self, X, y=None):
        # Nothing to learn; validate parameters only.
        self._params()
        return self

    def _params(self) -> NormalizationParams:
        return NormalizationParams(
            num_points=self.num_points, trim_epsilon=self.trim_epsilon
        )

    def transform(self, X) -> np.ndarray:
        params = self._params()
        out = []
        for item in X:
            track = item if isinstance(item, FeatureTrack) else _track_from_array(item)
            out.append(normalize_track(track, params).matrix())
        return np.stack(out)


def _track_from_array(values: np.ndarray) -> FeatureTrack:
    from .features import FrameFeatures

    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("raw feature input must have shape (frames, 3)")
    frames = tuple(
        FrameFeatures(dh=float(r[0]), dv=float(r[1]), da=float(r[2]), dark_count=0, s_dark=0.0)
        for r in arr
    )
    return FeatureTrack(frames=frames, fps=25.0)
