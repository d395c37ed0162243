"""Scoring an utterance against class templates and fusing the results.

Each (feature, class) pair owns a single sigmoid unit over the pointwise
template distances, mapped through a reciprocal similarity transform so a
perfect match scores 1 and large distances fade to 0. Unit outputs are
normalized across features within each class, weighted by per-class feature
coefficients, and summed; the class with the highest fused posterior wins.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .normalize import FEATURE_IDS, NormalizedFeatureVector
from .templates import ModelBundle, VisemeTemplate, build_template


@dataclass(frozen=True)
class ClassifierParams:
    distance_scale: float = 1.0  # slope of the distance-to-similarity transform
    scorer_mode: str = "uniform"  # "uniform" or "trained"
    learning_rate: float = 0.1
    epochs: int = 500

    def __post_init__(self) -> None:
        if self.distance_scale <= 0:
            raise ValueError("distance scale must be positive")
        if self.scorer_mode not in ("uniform", "trained"):
            raise ValueError(f"unknown scorer mode: {self.scorer_mode!r}")
        if self.learning_rate <= 0 or self.epochs < 1:
            raise ValueError("invalid training schedule")


@dataclass(frozen=True)
class NeuralUnit:
    """Single sigmoid neuron over one feature's transformed distances."""

    feature_id: str
    label: str
    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        arr = np.array(self.weights, dtype=np.float64)
        if arr.ndim != 1 or len(arr) < 2:
            raise ValueError("unit needs a 1-D weight vector of >= 2 entries")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    def score(self, inputs: np.ndarray) -> float:
        return float(_sigmoid(float(np.dot(self.weights, inputs)) + self.bias))


@dataclass(frozen=True)
class RecognitionResult:
    """Posterior per class (unnormalized), the winner, and the raw evidence."""

    labels: tuple[str, ...]
    posteriors: np.ndarray  # (n_classes,)
    winner: str
    feature_class_probs: np.ndarray  # (3, n_classes); columns sum to 1
    scores: np.ndarray  # raw unit outputs, (3, n_classes)
    distances: np.ndarray  # (3, n_classes, num_points)

    def posterior(self, label: str) -> float:
        return float(self.posteriors[self.labels.index(label)])


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def distance_vector(
    fv: NormalizedFeatureVector, template_curve: NormalizedFeatureVector
) -> np.ndarray:
    """Pointwise absolute differences between a curve and its template."""
    if fv.feature_id != template_curve.feature_id:
        raise ValueError(
            f"feature mismatch: {fv.feature_id!r} vs {template_curve.feature_id!r}"
        )
    if len(fv) != len(template_curve):
        raise ValueError("curve lengths differ")
    return np.abs(fv.values - template_curve.values)


def similarity(d: np.ndarray | float, distance_scale: float = 1.0):
    """Reciprocal distance transform: 1 at zero distance, toward 0 as d grows."""
    if distance_scale <= 0:
        raise ValueError("distance scale must be positive")
    out = 1.0 / (1.0 + distance_scale * np.asarray(d, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def uniform_unit(feature_id: str, label: str, num_points: int) -> NeuralUnit:
    """Deterministic fallback scorer: mean input through a sigmoid."""
    return NeuralUnit(
        feature_id=feature_id,
        label=label,
        weights=np.full(num_points, 1.0 / num_points),
        bias=0.0,
    )


def _unit_inputs(
    curves: Sequence[np.ndarray],
    template: np.ndarray,
    feature_row: int,
    distance_scale: float,
) -> np.ndarray:
    d = np.abs(np.stack([c[feature_row] for c in curves]) - template[feature_row])
    return 1.0 / (1.0 + distance_scale * d)


def train_units(
    training: Sequence[tuple[str, np.ndarray]],
    templates: dict[str, VisemeTemplate],
    params: ClassifierParams,
) -> dict[tuple[str, str], NeuralUnit]:
    """Fit one sigmoid unit per (feature, class) on transformed distances.

    Trained mode runs full-batch gradient descent on the cross-entropy loss
    with a fixed schedule (no shuffling, weights start at 1/n, bias at 0), so
    results are deterministic. Uniform mode skips fitting entirely.
    """
    labels = sorted(templates)
    num_points = templates[labels[0]].curves.shape[1]
    units: dict[tuple[str, str], NeuralUnit] = {}

    if params.scorer_mode == "uniform":
        for label in labels:
            for fid in FEATURE_IDS:
                units[(fid, label)] = uniform_unit(fid, label, num_points)
        return units

    train_labels = [lab for lab, _ in training]
    if len(set(train_labels)) < 2:
        raise ValueError("trained scorer mode needs at least 2 classes of training data")
    curves = [np.asarray(m, dtype=np.float64) for _, m in training]

    for label in labels:
        targets = np.array([1.0 if lab == label else 0.0 for lab in train_labels])
        tmpl = templates[label].curves
        for row, fid in enumerate(FEATURE_IDS):
            x = _unit_inputs(curves, tmpl, row, params.distance_scale)  # (m, n)
            w = np.full(num_points, 1.0 / num_points)
            b = 0.0
            m = len(targets)
            for _ in range(params.epochs):
                pred = _sigmoid(x @ w + b)
                err = pred - targets
                w = w - params.learning_rate * (x.T @ err) / m
                b = b - params.learning_rate * float(err.mean())
            units[(fid, label)] = NeuralUnit(
                feature_id=fid, label=label, weights=w, bias=b
            )
    return units


def recognize(
    fvs: Sequence[NormalizedFeatureVector], bundle: ModelBundle
) -> RecognitionResult:
    """Score the three curves against every class and fuse the evidence.

    The stored conditional matrix normalizes unit outputs over features
    within each class. The fusion instead Bayes-inverts the raw unit
    outputs: with a uniform class prior, each feature's posterior over
    classes is its output row renormalized across classes, and the
    per-class feature weights combine those per-feature posteriors.
    Fusing the feature-normalized matrix itself would be degenerate: that
    normalization is scale-free per class, so with uniform weights every
    class's fused score collapses to the same constant.
    """
    if len(fvs) != len(FEATURE_IDS) or tuple(v.feature_id for v in fvs) != FEATURE_IDS:
        raise ValueError("recognition needs the dh, dv, da curves in order")
    if any(len(v) != bundle.num_points for v in fvs):
        raise ValueError(
            f"curve point-count mismatch: model expects {bundle.num_points}"
        )

    n_classes = len(bundle.classes)
    dists = np.zeros((len(FEATURE_IDS), n_classes, bundle.num_points))
    scores = np.zeros((len(FEATURE_IDS), n_classes))
    for j, label in enumerate(bundle.classes):
        tmpl = bundle.templates[label]
        for i, fid in enumerate(FEATURE_IDS):
            d = np.abs(fvs[i].values - tmpl.curve(fid))
            e = 1.0 / (1.0 + bundle.distance_scale * d)
            dists[i, j] = d
            scores[i, j] = bundle.units[(fid, label)].score(e)

    col_sums = scores.sum(axis=0)
    if np.any(col_sums <= 0.0):
        raise ValueError("scorer produced a zero class column")  # unreachable with sigmoids
    probs = scores / col_sums  # P(feature evidence | class), columns sum to 1
    class_posts = scores / scores.sum(axis=1, keepdims=True)  # per-feature posterior over classes
    posteriors = (bundle.feature_weights * class_posts).sum(axis=0)
    winner = bundle.classes[int(np.argmax(posteriors))]
    return RecognitionResult(
        labels=bundle.classes,
        posteriors=posteriors,
        winner=winner,
        feature_class_probs=probs,
        scores=scores,
        distances=dists,
    )


class VisemeClassifier(ClassifierMixin, BaseEstimator):
    """Template-matching viseme classifier with the scikit-learn API.

    ``X`` is an array of shape (n_utterances, 3, num_points) holding the
    normalized dh/dv/da curves (see :class:`FeatureCurveNormalizer`); ``y``
    holds class labels. ``feature_weights`` is an optional (3, n_classes)
    matrix whose columns sum to 1; by default every feature weighs 1/3.
    """

    def __init__(
        self,
        num_points: int = 10,
        distance_scale: float = 1.0,
        scorer_mode: str = "uniform",
        feature_weights=None,
        learning_rate: float = 0.1,
        epochs: int = 500,
        dark_ratio: float = 0.3,
    ):
        self.num_points = num_points
        self.distance_scale = distance_scale
        self.scorer_mode = scorer_mode
        self.feature_weights = feature_weights
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.dark_ratio = dark_ratio

    def _validate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != len(FEATURE_IDS) or X.shape[2] != self.num_points:
            raise ValueError(
                f"X must have shape (n, 3, {self.num_points}), got {X.shape}"
            )
        if not np.isfinite(X).all():
            raise ValueError("X must be finite")
        return X

    def fit(self, X, y):
        X = self._validate(X)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError("X and y lengths differ")
        params = ClassifierParams(
            distance_scale=self.distance_scale,
            scorer_mode=self.scorer_mode,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
        )
        self.classes_ = np.unique(y)
        labels = tuple(str(c) for c in self.classes_)
        templates = {
            label: build_template(label, [X[i] for i in np.flatnonzero(y == cls)])
            for label, cls in zip(labels, self.classes_)
        }
        units = train_units(
            [(str(lab), mat) for lab, mat in zip(y, X)], templates, params
        )
        if self.feature_weights is None:
            weights = np.full((len(FEATURE_IDS), len(labels)), 1.0 / len(FEATURE_IDS))
        else:
            weights = np.asarray(self.feature_weights, dtype=np.float64)
        self.bundle_ = ModelBundle(
            num_points=self.num_points,
            classes=labels,
            scorer_mode=self.scorer_mode,
            distance_scale=self.distance_scale,
            dark_ratio=self.dark_ratio,
            feature_weights=weights,
            templates=templates,
            units=units,
        )
        return self

    def _results(self, X) -> list[RecognitionResult]:
        check_is_fitted(self, "bundle_")
        X = self._validate(X)
        out = []
        for mat in X:
            fvs = tuple(
                NormalizedFeatureVector(feature_id=fid, values=mat[i], scale_basis=1.0)
                for i, fid in enumerate(FEATURE_IDS)
            )
            out.append(recognize(fvs, self.bundle_))
        return out

    def predict(self, X) -> np.ndarray:
        return np.array([r.winner for r in self._results(X)])

    def predict_proba(self, X) -> np.ndarray:
        rows = []
        for r in self._results(X):
            p = r.posteriors
            rows.append(p / p.sum())
        return np.array(rows)

    def to_bundle(self) -> ModelBundle:
        check_is_fitted(self, "bundle_")
        return self.bundle_

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "VisemeClassifier":
        clf = cls(
            num_points=bundle.num_points,
            distance_scale=bundle.distance_scale,
            scorer_mode=bundle.scorer_mode,
            feature_weights=np.array(bundle.feature_weights),
            dark_ratio=bundle.dark_ratio,
        )
        clf.classes_ = np.array(bundle.classes)
        clf.bundle_ = bundle
        return clf
