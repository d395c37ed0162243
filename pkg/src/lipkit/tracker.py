"""Landmark tracking by directional candidate search and per-pixel voting.

For each landmark and each consecutive frame pair, candidate positions are
laid out along the eight chain-code directions up to a fixed number of steps.
Every candidate block is compared pixel-by-pixel against the model block from
the previous frame; each pixel position casts one vote for every candidate
attaining the minimal luminance distance there, and the candidate with the
most votes wins. Because a vote counts details rather than integrating the
whole block, isolated noise or a brightness change only costs a few voices
instead of skewing the full score. An SSD/NCC baseline over the identical
search lattice is included for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imaging import Block, Frame, PixelPoint, clamp_block_center, extract_block
from .snake import POI_NAMES, PoiSet

# The eight chain-code unit steps, counterclockwise from east
# (image coordinates: y grows downward, so "north" is -y).
FREEMAN_OFFSETS: tuple[tuple[int, int], ...] = (
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
)


@dataclass(frozen=True)
class FreemanDirection:
    """One of the 8 chain-code directions with its unit pixel offset."""

    code: int
    offset: tuple[int, int]

    def __post_init__(self) -> None:
        if not 0 <= self.code <= 7:
            raise ValueError("direction code must be in 0..7")
        if self.offset != FREEMAN_OFFSETS[self.code]:
            raise ValueError("offset does not match the direction code")


FREEMAN_DIRECTIONS: tuple[FreemanDirection, ...] = tuple(
    FreemanDirection(code, off) for code, off in enumerate(FREEMAN_OFFSETS)
)


@dataclass(frozen=True)
class TrackerParams:
    block_size: int = 11
    steps: int = 10  # candidates per direction
    include_stationary: bool = True

    def __post_init__(self) -> None:
        if self.block_size % 2 == 0 or self.block_size < 3:
            raise ValueError("block size must be odd and >= 3")
        if self.steps < 1:
            raise ValueError("steps per direction must be >= 1")


@dataclass(frozen=True)
class Candidate:
    """A candidate landmark position: where it is and how it was generated."""

    center: PixelPoint
    direction: int | None  # chain-code direction, None for the stationary candidate
    step: int


@dataclass
class Accumulator:
    """Per-candidate, per-pixel luminance distance table for one vote round."""

    origin: PixelPoint
    candidates: list[Candidate]
    distances: np.ndarray  # shape (n_candidates, block_size**2)
    votes: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.distances.ndim != 2 or self.distances.shape[0] != len(self.candidates):
            raise ValueError("distance table must have one row per candidate")


@dataclass(frozen=True)
class MoveRecord:
    """Winning candidate bookkeeping for one landmark on one frame step."""

    direction: int | None
    step: int
    votes: int
    margin: float


@dataclass(frozen=True)
class TrackResult:
    """Tracked landmarks for frames 1..T plus per-step election records."""

    poi_sets: tuple[PoiSet, ...]
    moves: tuple[dict[str, MoveRecord], ...]  # one dict per frame transition

    def __post_init__(self) -> None:
        if len(self.moves) != max(len(self.poi_sets) - 1, 0):
            raise ValueError("need one move record per frame transition")

    @classmethod
    def from_poi_sets(cls, poi_sets: Sequence[PoiSet]) -> "TrackResult":
        sets = tuple(poi_sets)
        return cls(poi_sets=sets, moves=tuple({} for _ in sets[1:]))


def generate_candidates(
    p: PixelPoint, params: TrackerParams, width: int, height: int
) -> list[Candidate]:
    """Candidate centers along all 8 directions, 1..steps pixels out.

    Centers are clamped to the frame and deduplicated (first occurrence
    wins); the unmoved position is appended when ``include_stationary``.
    """
    seen: set[PixelPoint] = set()
    out: list[Candidate] = []
    for direction in FREEMAN_DIRECTIONS:
        dx, dy = direction.offset
        for step in range(1, params.steps + 1):
            c = PixelPoint(
                min(max(p.x + step * dx, 0), width - 1),
                min(max(p.y + step * dy, 0), height - 1),
            )
            if c not in seen:
                seen.add(c)
                out.append(Candidate(center=c, direction=direction.code, step=step))
    if params.include_stationary and p not in seen:
        out.append(Candidate(center=p, direction=None, step=0))
    return out


def pixel_distances(model: Block, cand: Block) -> np.ndarray:
    """Per-pixel absolute luminance differences, flattened row of size w*w."""
    if model.size != cand.size:
        raise ValueError("model and candidate block sizes differ")
    return np.abs(cand.pixels - model.pixels).ravel()


def vote(acc: Accumulator) -> int:
    """Elect the candidate winning the most per-pixel minimum-distance votes.

    Every candidate attaining a pixel column's minimum gains one voice there.
    Vote ties break by smaller total distance, then smaller displacement from
    the origin, then lower candidate index. Fills ``acc.votes``.
    """
    if len(acc.candidates) == 0:
        raise ValueError("empty accumulator")
    col_min = acc.distances.min(axis=0)
    votes = (acc.distances == col_min).sum(axis=1)
    acc.votes = votes
    totals = acc.distances.sum(axis=1)
    disp = np.array(
        [math.hypot(c.center.x - acc.origin.x, c.center.y - acc.origin.y) for c in acc.candidates]
    )
    return min(
        range(len(acc.candidates)),
        key=lambda j: (-int(votes[j]), float(totals[j]), float(disp[j]), j),
    )


def _block_row(frame: Frame, center: PixelPoint, size: int) -> np.ndarray:
    fitted = clamp_block_center(center, size, frame.width, frame.height)
    half = size // 2
    return frame.data[
        fitted.y - half : fitted.y + half + 1, fitted.x - half : fitted.x + half + 1
    ].ravel()


def _margin(scores: np.ndarray, best: int, maximize: bool) -> float:
    if len(scores) < 2:
        return float(scores[best]) if maximize else 0.0
    rest = np.delete(scores, best)
    if maximize:
        return float(scores[best] - rest.max())
    return float(rest.min() - scores[best])


def _track(
    frames: Sequence[Frame],
    seed: PoiSet,
    params: TrackerParams,
    method: str,
) -> TrackResult:
    if len(frames) < 2:
        raise ValueError("tracking needs at least 2 frames")
    if method not in ("vote", "ssd", "ncc"):
        raise ValueError(f"unknown tracking method: {method}")
    w = params.block_size
    if w > min(frames[0].width, frames[0].height):
        raise ValueError("block size exceeds frame dimensions")

    positions = {name: p for name, p in seed.items()}
    poi_sets = [seed]
    moves: list[dict[str, MoveRecord]] = []

    for t in range(1, len(frames)):
        prev_frame, cur_frame = frames[t - 1], frames[t]
        frame_moves: dict[str, MoveRecord] = {}
        for name in POI_NAMES:
            pos = positions[name]
            model = extract_block(prev_frame, pos, w)
            candidates = generate_candidates(pos, params, cur_frame.width, cur_frame.height)
            rows = np.stack(
                [_block_row(cur_frame, c.center, w) for c in candidates]
            )
            diffs = np.abs(rows - model.pixels.ravel())

            if method == "vote":
                acc = Accumulator(origin=pos, candidates=candidates, distances=diffs)
                best = vote(acc)
                votes = int(acc.votes[best])
                margin = float(votes - (np.delete(acc.votes, best).max() if len(candidates) > 1 else 0))
            else:
                if method == "ssd":
                    scores = (diffs * diffs).sum(axis=1)
                    sign = 1.0
                else:
                    model_row = model.pixels.ravel()
                    model_norm = float(np.sqrt((model_row * model_row).sum()))
                    cand_norms = np.sqrt((rows * rows).sum(axis=1))
                    denom = cand_norms * model_norm
                    scores = np.where(
                        denom > 0.0,
                        (rows * model_row).sum(axis=1) / np.where(denom > 0.0, denom, 1.0),
                        0.0,
                    )
                    sign = -1.0  # correlation is maximized
                best = min(
                    range(len(candidates)),
                    key=lambda j: (
                        sign * float(scores[j]),
                        math.hypot(
                            candidates[j].center.x - pos.x,
                            candidates[j].center.y - pos.y,
                        ),
                        j,
                    ),
                )
                margin = _margin(scores, best, maximize=method == "ncc")
                votes = 0

            won = candidates[best]
            positions[name] = won.center
            frame_moves[name] = MoveRecord(
                direction=won.direction, step=won.step, votes=votes, margin=margin
            )
        poi_sets.append(
            PoiSet(
                left_corner=positions["left_corner"],
                right_corner=positions["right_corner"],
                upper_center=positions["upper_center"],
                lower_center=positions["lower_center"],
            )
        )
        moves.append(frame_moves)

    return TrackResult(poi_sets=tuple(poi_sets), moves=tuple(moves))


def track_sequence(
    frames: Sequence[Frame], seed: PoiSet, params: TrackerParams
) -> TrackResult:
    """Track all four landmarks with the voting matcher.

    The model block refreshes every frame: the block around the landmark's
    position in frame i-1 is searched for in frame i.
    """
    return _track(frames, seed, params, "vote")


def track_sequence_baseline(
    frames: Sequence[Frame], seed: PoiSet, params: TrackerParams, method: str = "ssd"
) -> TrackResult:
    """Track with whole-block SSD or NCC over the same candidate lattice."""
    if method not in ("ssd", "ncc"):
        raise ValueError(f"baseline method must be 'ssd' or 'ncc', got {method!r}")
    return _track(frames, seed, params, method)
