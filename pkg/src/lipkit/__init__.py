"""Toolkit for visual speech recognition from grayscale mouth-image sequences.

Pipeline stages: locate the outer lip contour on the first frame with an
active contour, derive the four lip landmarks, track them with a
direction-lattice voting block matcher, extract per-frame mouth descriptors,
normalize the descriptor curves, and classify the utterance against per-class
templates with probability fusion.
"""

from .imaging import Frame, PixelPoint, load_sequence
from .snake import PoiSet, SnakeParams, extract_pois, minimize
from .tracker import TrackerParams, track_sequence
from .features import DarkParams, FeatureTrack, extract_track
from .normalize import FeatureCurveNormalizer, NormalizationParams, normalize_track
from .templates import ModelBundle, load_bundle, save_bundle
from .classify import ClassifierParams, VisemeClassifier, recognize
from .pipeline import PipelineConfig, utterance_curves

__version__ = "0.1.0"

__all__ = [
    "ClassifierParams",
    "DarkParams",
    "FeatureCurveNormalizer",
    "FeatureTrack",
    "Frame",
    "ModelBundle",
    "NormalizationParams",
    "PipelineConfig",
    "PixelPoint",
    "PoiSet",
    "SnakeParams",
    "TrackerParams",
    "VisemeClassifier",
    "extract_pois",
    "extract_track",
    "load_bundle",
    "load_sequence",
    "minimize",
    "normalize_track",
    "recognize",
    "save_bundle",
    "track_sequence",
    "utterance_curves",
]
