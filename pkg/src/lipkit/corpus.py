"""Synthetic mouth sequences with ground truth, plus evaluation harness.

Real labeled mouth video is scarce, so tests and the evaluation harness run
on rendered sequences: an anti-aliased double ellipse (bright lips around a
dark interior) over shaded skin, articulated per class. The generator knows
the true landmark positions, the dark-pixel mask, and the active speech span
for every frame, which turns the whole pipeline into something that can be
scored exactly.

Class articulation profiles:
  ba  - opening: the mouth opens wide (vertical bump), barely stretches.
  bi  - stretch: the mouth stretches wide (horizontal bump), barely opens.
  bou - forward: the mouth narrows while the dark interior grows.

"ba" and "bi" are deliberately the most similar pair (mirror-image bumps of
the same two distances); "bou" moves the width the opposite way.

Both lips carry a small central lobe riding on the outer boundary. Without
one a boundary is locally flat, horizontal motion of the center blocks is
unobservable (aperture problem), and trackers wander in x on ties, skewing
the landmark quadrilateral; the lobes pin the x positions the way real lip
structure does.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import VisemeClassifier
from .imaging import Frame, PixelPoint
from .pipeline import PipelineConfig, utterance_curves
from .snake import PoiSet

_LABELS = ("ba", "bi", "bou")


@dataclass(frozen=True)
class SyntheticUtteranceSpec:
    """Recipe for one rendered utterance."""

    label: str
    num_frames: int = 35
    fps: float = 25.0
    width: int = 160
    height: int = 120
    corner_span: float = 46.0  # resting corner-to-corner distance
    opening: float = 14.0  # resting vertical opening
    lip_thickness: float = 8.0
    active_start: int = 6  # first frame of articulation (0-based)
    active_end: int = 24  # last frame of articulation
    impulse_fraction: float = 0.0  # salt-and-pepper pixel fraction
    offset_mode: str = "none"  # "none" | "alternating" | "drift"
    offset_amplitude: float = 0.0
    jitter: float = 0.0  # relative spread of per-utterance geometry variation
    antialias: bool = True  # soft ellipse edges; hard levels when off
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.label not in _LABELS:
            raise ValueError(f"unknown class label: {self.label!r}")
        if self.num_frames < 10:
            raise ValueError("need at least 10 frames")
        if not 0 <= self.active_start < self.active_end < self.num_frames:
            raise ValueError("active span must fit inside the utterance")
        if not 0.0 <= self.impulse_fraction <= 0.5:
            raise ValueError("impulse fraction must lie in [0, 0.5]")
        if self.offset_mode not in ("none", "alternating", "drift"):
            raise ValueError(f"unknown offset mode: {self.offset_mode!r}")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knows about the sequence it rendered."""

    label: str
    fps: float
    poi_sets: tuple[PoiSet, ...]
    dh: np.ndarray  # designed corner distance per frame
    dv: np.ndarray  # designed opening distance per frame
    dark_masks: tuple[np.ndarray, ...]  # per-frame boolean interior masks
    active_start: int
    active_end: int


@dataclass(frozen=True)
class EvaluationReport:
    """Confusion matrix (rows = true class, columns = predicted) and rates."""

    labels: tuple[str, ...]
    matrix: np.ndarray  # (n, n) integer counts
    train_counts: dict[str, int]
    test_counts: dict[str, int]

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.int64)
        if m.shape != (len(self.labels), len(self.labels)):
            raise ValueError("confusion matrix shape does not match labels")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def per_class_rate(self) -> np.ndarray:
        totals = self.matrix.sum(axis=1)
        return np.where(totals > 0, np.diag(self.matrix) / np.maximum(totals, 1), 0.0)

    @property
    def overall_rate(self) -> float:
        total = int(self.matrix.sum())
        return float(np.trace(self.matrix)) / total if total else 0.0

    def to_text(self) -> str:
        width = max(5, max(len(l) for l in self.labels) + 1)
        head = " " * width + "".join(f"{l:>{width}}" for l in self.labels) + f"{'rate':>9}"
        lines = ["confusion matrix (rows = true, cols = predicted)", head]
        for i, label in enumerate(self.labels):
            row = f"{label:>{width}}" + "".join(
                f"{int(v):>{width}}" for v in self.matrix[i]
            )
            lines.append(row + f"{self.per_class_rate[i] * 100:>8.2f}%")
        trained = ", ".join(f"{l}={self.train_counts[l]}" for l in self.labels)
        tested = ", ".join(f"{l}={self.test_counts[l]}" for l in self.labels)
        lines.append(f"overall rate {self.overall_rate * 100:.2f}%")
        lines.append(f"train counts: {trained}")
        lines.append(f"test counts: {tested}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["true_label," + ",".join(self.labels) + ",rate"]
        for i, label in enumerate(self.labels):
            cells = ",".join(str(int(v)) for v in self.matrix[i])
            lines.append(f"{label},{cells},{self.per_class_rate[i]:.6f}")
        lines.append(f"overall,,,{self.overall_rate:.6f}")
        return "\n".join(lines) + "\n"


def _iround(x: float) -> int:
    return int(np.floor(x + 0.5))


def _half(x: float) -> float:
    """Quantize to half-pixel steps so rounded landmark pairs keep exact spans."""
    return round(x * 2.0) / 2.0


def _bump(t: np.ndarray, start: int, end: int) -> np.ndarray:
    """Raised-cosine articulation bump: 0 outside [start, end], 1 at the middle."""
    phase = np.clip((t - start) / max(end - start, 1), 0.0, 1.0)
    out = 0.5 * (1.0 - np.cos(2.0 * np.pi * phase))
    out[(t < start) | (t > end)] = 0.0
    return out


def _ellipse_coverage(
    sub_x: np.ndarray, sub_y: np.ndarray, cx: float, cy: float, a: float, b: float
) -> np.ndarray:
    """Pixel coverage of an ellipse from supersampled point tests."""
    if a <= 0.0 or b <= 0.0:
        return np.zeros(sub_x.shape[:2])
    inside = ((sub_x - cx) / a) ** 2 + ((sub_y - cy) / b) ** 2 <= 1.0
    return inside.mean(axis=2)


def synthesize(spec: SyntheticUtteranceSpec) -> tuple[list[Frame], GroundTruth]:
    """Render one utterance and return it with its ground truth.

    Deterministic for a given spec (the seed drives geometry jitter, noise,
    and the luminance offset schedule).
    """
    rng = np.random.default_rng(spec.rng_seed)
    jit = lambda: 1.0 + spec.jitter * rng.uniform(-1.0, 1.0)

    cx, cy = spec.width / 2.0, spec.height / 2.0
    half_w0 = (spec.corner_span / 2.0) * jit()
    half_h0 = (spec.opening / 2.0) * jit()
    thickness = spec.lip_thickness * jit()
    start = max(1, spec.active_start + int(round(spec.jitter * rng.uniform(-2.0, 2.0))))
    end = min(spec.num_frames - 2, spec.active_end + int(round(spec.jitter * rng.uniform(-2.0, 2.0))))
    if end <= start:
        start, end = spec.active_start, spec.active_end

    t = np.arange(spec.num_frames, dtype=np.float64)
    bump = _bump(t, start, end)
    if spec.label == "ba":
        d_width = 1.5 * jit()
        d_height = 7.0 * jit()
        d_inner = 0.0
    elif spec.label == "bi":
        d_width = 8.0 * jit()
        d_height = 1.5 * jit()
        d_inner = 0.0
    else:  # bou
        d_width = -7.0 * jit()
        d_height = 2.0 * jit()
        d_inner = 2.5 * jit()  # interior grows as the lips push forward

    half_w = np.array([_half(half_w0 + d_width * v) for v in bump])
    half_h = np.array([_half(half_h0 + d_height * v) for v in bump])
    inner_gain = d_inner * bump

    max_w = half_w.max() + 2.0
    max_h = half_h.max() + 4.0  # includes the lip lobes
    if cx - max_w < 2 or cx + max_w > spec.width - 3 or cy - max_h < 2 or cy + max_h > spec.height - 3:
        raise ValueError("mouth geometry exceeds frame bounds")

    # Luminance schedule.
    if spec.offset_mode == "alternating":
        offsets = np.where(np.arange(spec.num_frames) % 2 == 1, spec.offset_amplitude, 0.0)
    elif spec.offset_mode == "drift":
        offsets = rng.uniform(-spec.offset_amplitude, spec.offset_amplitude, spec.num_frames)
    else:
        offsets = np.zeros(spec.num_frames)

    # Sampling grids: pixel centers, plus a 3x3 subgrid when anti-aliasing.
    ss = 3 if spec.antialias else 1
    px_y, px_x = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    sub_dx, sub_dy = np.meshgrid(offs, offs)
    sub_x = px_x[:, :, None] + sub_dx.ravel()[None, None, :]
    sub_y = px_y[:, :, None] + sub_dy.ravel()[None, None, :]

    # Flat luminance levels with pairwise contrasts well above the offset
    # amplitudes used in tests, so a global offset cannot make one region
    # masquerade as another. The interior sits far below the adaptive dark
    # cutoff (~0.3 * region mean) even when it fills most of the landmark
    # quadrilateral and drags the mean down, and even under additive drift.
    skin, lip_value, dark_value = 130.0, 200.0, 15.0

    # Central lip lobes: ride on the outer boundary, extend it by 2 px.
    lobe_rx, lobe_ry, lobe_drop = 5.0, 3.0, 2.0

    frames: list[Frame] = []
    poi_sets: list[PoiSet] = []
    dark_masks: list[np.ndarray] = []
    for k in range(spec.num_frames):
        a, b = float(half_w[k]), float(half_h[k])
        a_in = max(a - thickness, 0.0) + 2.0 * float(inner_gain[k])
        b_in = max(b - 0.6 * thickness, 0.0) + float(inner_gain[k])
        b_in = min(b_in, max(b - 1.0, 0.0))  # interior stays inside the lips

        cov_out = _ellipse_coverage(sub_x, sub_y, cx, cy, a, b)
        cov_low = _ellipse_coverage(
            sub_x, sub_y, cx, cy + b + lobe_drop - lobe_ry, lobe_rx, lobe_ry
        )
        cov_up = _ellipse_coverage(
            sub_x, sub_y, cx, cy - b - lobe_drop + lobe_ry, lobe_rx, lobe_ry
        )
        cov_out = np.maximum(np.maximum(cov_out, cov_low), cov_up)
        cov_in = _ellipse_coverage(sub_x, sub_y, cx, cy, a_in, b_in)
        img = skin * (1.0 - cov_out) + lip_value * (cov_out - cov_in) + dark_value * cov_in

        img = img + offsets[k]
        if spec.impulse_fraction > 0.0:
            flat = img.reshape(-1)
            count = int(round(spec.impulse_fraction * flat.size))
            if count:
                idx = rng.choice(flat.size, size=count, replace=False)
                flat[idx] = np.where(rng.random(count) < 0.5, 0.0, 255.0)
        frames.append(Frame(np.clip(img, 0.0, 255.0)))

        poi_sets.append(
            PoiSet(
                left_corner=PixelPoint(_iround(cx - a), _iround(cy)),
                right_corner=PixelPoint(_iround(cx + a), _iround(cy)),
                upper_center=PixelPoint(_iround(cx), _iround(cy - b - lobe_drop)),
                lower_center=PixelPoint(_iround(cx), _iround(cy + b + lobe_drop)),
            )
        )
        inner = ((px_x - cx) / max(a_in, 1e-9)) ** 2 + ((px_y - cy) / max(b_in, 1e-9)) ** 2
        dark_masks.append((inner <= 1.0) if (a_in > 0 and b_in > 0) else np.zeros_like(inner, dtype=bool))

    truth = GroundTruth(
        label=spec.label,
        fps=spec.fps,
        poi_sets=tuple(poi_sets),
        dh=2.0 * half_w,
        dv=2.0 * half_h + 2.0 * lobe_drop,
        dark_masks=tuple(dark_masks),
        active_start=start,
        active_end=end,
    )
    return frames, truth


def make_corpus(
    per_class: int,
    base_spec: SyntheticUtteranceSpec | None = None,
    seed: int = 0,
) -> list[tuple[str, SyntheticUtteranceSpec]]:
    """Specs for a balanced corpus; each utterance gets its own derived seed."""
    if per_class < 1:
        raise ValueError("need at least one utterance per class")
    base = base_spec or SyntheticUtteranceSpec(label="ba", jitter=0.1)
    out = []
    k = 0
    for label in _LABELS:
        for _ in range(per_class):
            out.append((label, replace(base, label=label, rng_seed=seed * 100003 + k)))
            k += 1
    return out


def load_manifest(path: str | Path) -> list[tuple[str, Path]]:
    """Read ``label,path`` lines; relative paths resolve against the manifest."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "," not in line:
            raise ValueError(f"malformed manifest line {lineno}: {raw!r}")
        label, rel = line.split(",", 1)
        entry = Path(rel.strip())
        if not entry.is_absolute():
            entry = path.parent / entry
        entries.append((label.strip(), entry))
    if not entries:
        raise ValueError(f"manifest is empty: {path}")
    return entries


def split_indices(
    labels: Sequence[str], train_fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    """Per-class seeded shuffle split into train/test index lists."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train fraction must lie strictly between 0 and 1")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for cls in classes:
        idx = [i for i, lab in enumerate(labels) if lab == cls]
        rng.shuffle(idx)
        n_train = int(len(idx) * train_fraction)
        if n_train < 1 or n_train >= len(idx):
            raise ValueError(f"class {cls!r} has an empty train or test split")
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return sorted(train), sorted(test)


def evaluate(
    utterances: Sequence[tuple[str, Sequence[Frame]]],
    train_fraction: float,
    config: PipelineConfig,
    seed: int = 0,
) -> EvaluationReport:
    """Run the full pipeline on a labeled corpus and tabulate confusion.

    Every utterance goes through contour localization, tracking, feature
    extraction, and normalization; the classifier is fitted on the train
    split and scored on the test split.
    """
    labels = [lab for lab, _ in utterances]
    train_idx, test_idx = split_indices(labels, train_fraction, seed)

    curves = [
        utterance_curves(frames, config).matrix() for _, frames in utterances
    ]
    clf = VisemeClassifier(
        num_points=config.normalization.num_points,
        distance_scale=config.classifier.distance_scale,
        scorer_mode=config.classifier.scorer_mode,
        learning_rate=config.classifier.learning_rate,
        epochs=config.classifier.epochs,
        dark_ratio=config.dark.threshold_ratio,
    )
    clf.fit([curves[i] for i in train_idx], [labels[i] for i in train_idx])
    predictions = clf.predict([curves[i] for i in test_idx])

    class_order = tuple(str(c) for c in clf.classes_)
    lut = {lab: k for k, lab in enumerate(class_order)}
    matrix = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    for i, pred in zip(test_idx, predictions):
        matrix[lut[labels[i]], lut[str(pred)]] += 1

    return EvaluationReport(
        labels=class_order,
        matrix=matrix,
        train_counts={c: sum(1 for i in train_idx if labels[i] == c) for c in class_order},
        test_counts={c: sum(1 for i in test_idx if labels[i] == c) for c in class_order},
    )
