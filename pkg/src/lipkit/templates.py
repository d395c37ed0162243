"""Per-class feature templates and the trained-model bundle file format.

A class template is the pointwise mean of all training utterances' normalized
curves, one curve per feature. Bundles are persisted as versioned plain text
(diff-friendly) with a checksum line guarding against truncation; floats are
written with ``repr`` so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .normalize import FEATURE_IDS

if TYPE_CHECKING:  # pragma: no cover
    from .classify import NeuralUnit

_FORMAT_HEADER = "viseme-model"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class VisemeClass:
    """A recognizable mouth-movement class with its articulatory label."""

    label: str
    movement: str


# The three vowel-viseme classes this corpus distinguishes.
OPENING = VisemeClass("ba", "opening")
STRETCH = VisemeClass("bi", "stretch")
FORWARD = VisemeClass("bou", "forward")
CORPUS_CLASSES = (OPENING, STRETCH, FORWARD)


@dataclass(frozen=True)
class VisemeTemplate:
    """Mean normalized curves of one class; rows follow FEATURE_IDS order."""

    label: str
    curves: np.ndarray  # shape (3, num_points)
    sample_count: int

    def __post_init__(self) -> None:
        arr = np.array(self.curves, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(FEATURE_IDS):
            raise ValueError("template needs one curve per feature")
        if self.sample_count < 1:
            raise ValueError("template must average at least one utterance")
        arr.setflags(write=False)
        object.__setattr__(self, "curves", arr)

    def curve(self, feature_id: str) -> np.ndarray:
        return self.curves[FEATURE_IDS.index(feature_id)]


def build_template(label: str, curve_sets: Sequence[np.ndarray]) -> VisemeTemplate:
    """Pointwise mean over the training utterances' (3, num_points) matrices."""
    if len(curve_sets) == 0:
        raise ValueError("cannot build a template from zero utterances")
    stack = np.stack([np.asarray(c, dtype=np.float64) for c in curve_sets])
    if stack.ndim != 3 or stack.shape[1] != len(FEATURE_IDS):
        raise ValueError("each training matrix must have shape (3, num_points)")
    return VisemeTemplate(
        label=label, curves=stack.mean(axis=0), sample_count=len(curve_sets)
    )


@dataclass(frozen=True)
class ModelBundle:
    """Everything the recognizer needs: templates, scorer weights, parameters."""

    num_points: int
    classes: tuple[str, ...]
    scorer_mode: str
    distance_scale: float
    dark_ratio: float
    feature_weights: np.ndarray  # (3, n_classes); each column sums to 1
    templates: Mapping[str, VisemeTemplate]
    units: Mapping[tuple[str, str], "NeuralUnit"]  # keyed (feature_id, label)

    def __post_init__(self) -> None:
        if self.num_points < 2:
            raise ValueError("bundle needs at least 2 curve points")
        if len(set(self.classes)) != len(self.classes) or not self.classes:
            raise ValueError("bundle classes must be non-empty and distinct")
        if self.scorer_mode not in ("uniform", "trained"):
            raise ValueError(f"unknown scorer mode: {self.scorer_mode!r}")
        if self.distance_scale <= 0:
            raise ValueError("distance scale must be positive")
        w = np.array(self.feature_weights, dtype=np.float64)
        if w.shape != (len(FEATURE_IDS), len(self.classes)):
            raise ValueError("feature weight matrix must be (3, n_classes)")
        if not np.allclose(w.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("feature weights must sum to 1 per class")
        w.setflags(write=False)
        object.__setattr__(self, "feature_weights", w)
        if set(self.templates) != set(self.classes):
            raise ValueError("bundle must hold one template per class")
        for tmpl in self.templates.values():
            if tmpl.curves.shape[1] != self.num_points:
                raise ValueError("template curve length does not match bundle")
        expected = {(f, c) for f in FEATURE_IDS for c in self.classes}
        if set(self.units) != expected:
            raise ValueError("bundle must hold one scorer unit per (feature, class)")
        for unit in self.units.values():
            if len(unit.weights) != self.num_points:
                raise ValueError("scorer unit weight length does not match bundle")


def _fmt(x: float) -> str:
    return repr(float(x))


def _render(bundle: ModelBundle) -> list[str]:
    lines = [f"{_FORMAT_HEADER} {_FORMAT_VERSION}"]
    lines.append(f"points {bundle.num_points}")
    lines.append("classes " + " ".join(bundle.classes))
    lines.append(f"scorer {bundle.scorer_mode}")
    lines.append(f"distance_scale {_fmt(bundle.distance_scale)}")
    lines.append(f"dark_ratio {_fmt(bundle.dark_ratio)}")
    for i, fid in enumerate(FEATURE_IDS):
        row = " ".join(_fmt(v) for v in bundle.feature_weights[i])
        lines.append(f"weights {fid} {row}")
    for label in bundle.classes:
        lines.append(f"samples {label} {bundle.templates[label].sample_count}")
    for label in bundle.classes:
        for fid in FEATURE_IDS:
            row = " ".join(_fmt(v) for v in bundle.templates[label].curve(fid))
            lines.append(f"template {label} {fid} {row}")
    for label in bundle.classes:
        for fid in FEATURE_IDS:
            unit = bundle.units[(fid, label)]
            row = " ".join(_fmt(v) for v in unit.weights)
            lines.append(f"unit {fid} {label} {_fmt(unit.bias)} {row}")
    return lines


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    """Write the bundle as checksummed plain text."""
    lines = _render(bundle)
    digest = hashlib.sha256("\n".join(lines).encode("ascii")).hexdigest()
    lines.append(f"checksum {digest}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_bundle(path: str | Path) -> ModelBundle:
    """Read a bundle back, verifying version and checksum."""
    from .classify import NeuralUnit

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model bundle not found: {path}")
    lines = path.read_text(encoding="ascii").splitlines()
    if len(lines) < 8 or not lines[-1].startswith("checksum "):
        raise ValueError(f"corrupted model bundle: {path}")
    header = lines[0].split()
    if header[:1] != [_FORMAT_HEADER] or len(header) != 2:
        raise ValueError(f"corrupted model bundle: {path}")
    if int(header[1]) != _FORMAT_VERSION:
        raise ValueError(f"unsupported model bundle version {header[1]} in {path}")
    digest = hashlib.sha256("\n".join(lines[:-1]).encode("ascii")).hexdigest()
    if lines[-1].split()[1] != digest:
        raise ValueError(f"corrupted model bundle (checksum mismatch): {path}")

    fields: dict[str, str] = {}
    weights: dict[str, np.ndarray] = {}
    samples: dict[str, int] = {}
    curves: dict[tuple[str, str], np.ndarray] = {}
    units: dict[tuple[str, str], NeuralUnit] = {}
    for line in lines[1:-1]:
        tag, rest = line.split(" ", 1)
        if tag in ("points", "classes", "scorer", "distance_scale", "dark_ratio"):
            fields[tag] = rest
        elif tag == "weights":
            fid, row = rest.split(" ", 1)
            weights[fid] = np.array([float(v) for v in row.split()])
        elif tag == "samples":
            label, count = rest.split()
            samples[label] = int(count)
        elif tag == "template":
            label, fid, row = rest.split(" ", 2)
            curves[(label, fid)] = np.array([float(v) for v in row.split()])
        elif tag == "unit":
            fid, label, bias, row = rest.split(" ", 3)
            units[(fid, label)] = NeuralUnit(
                feature_id=fid,
                label=label,
                weights=np.array([float(v) for v in row.split()]),
                bias=float(bias),
            )
        else:
            raise ValueError(f"corrupted model bundle (unknown line {tag!r}): {path}")

    try:
        classes = tuple(fields["classes"].split())
        templates = {
            label: VisemeTemplate(
                label=label,
                curves=np.stack([curves[(label, fid)] for fid in FEATURE_IDS]),
                sample_count=samples[label],
            )
            for label in classes
        }
        return ModelBundle(
            num_points=int(fields["points"]),
            classes=classes,
            scorer_mode=fields["scorer"],
            distance_scale=float(fields["distance_scale"]),
            dark_ratio=float(fields["dark_ratio"]),
            feature_weights=np.stack([weights[fid] for fid in FEATURE_IDS]),
            templates=templates,
            units=units,
        )
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ValueError) and "bundle" in str(exc):
            raise
        raise ValueError(f"corrupted model bundle (missing fields): {path}") from exc


def bundles_equal(a: ModelBundle, b: ModelBundle) -> bool:
    """Field-for-field equality, exact on every float."""
    if (
        a.num_points != b.num_points
        or a.classes != b.classes
        or a.scorer_mode != b.scorer_mode
        or a.distance_scale != b.distance_scale
        or a.dark_ratio != b.dark_ratio
        or not np.array_equal(a.feature_weights, b.feature_weights)
    ):
        return False
    for label in a.classes:
        ta, tb = a.templates[label], b.templates[label]
        if ta.sample_count != tb.sample_count or not np.array_equal(ta.curves, tb.curves):
            return False
    for key in a.units:
        ua, ub = a.units[key], b.units[key]
        if ua.bias != ub.bias or not np.array_equal(ua.weights, ub.weights):
            return False
    return True
