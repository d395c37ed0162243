import numpy as np
import pytest

from lipkit.corpus import (
    EvaluationReport,
    SyntheticUtteranceSpec,
    evaluate,
    load_manifest,
    make_corpus,
    split_indices,
    synthesize,
)
from lipkit.features import DarkParams, extract_track
from lipkit.pipeline import PipelineConfig
from lipkit.tracker import TrackResult


class TestSpecValidation:
    def test_unknown_label(self):
        with pytest.raises(ValueError, match="label"):
            SyntheticUtteranceSpec(label="bo")

    def test_noise_fraction_bounds(self):
        with pytest.raises(ValueError, match="impulse"):
            SyntheticUtteranceSpec(label="ba", impulse_fraction=0.6)

    def test_active_span_must_fit(self):
        with pytest.raises(ValueError, match="active span"):
            SyntheticUtteranceSpec(label="ba", num_frames=20, active_end=25)

    def test_geometry_must_fit_frame(self):
        with pytest.raises(ValueError, match="bounds"):
            synthesize(SyntheticUtteranceSpec(label="bi", corner_span=170.0))


class TestSynthesize:
    def test_deterministic_given_seed(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=9, jitter=0.1,
                                      impulse_fraction=0.05, offset_mode="drift",
                                      offset_amplitude=10.0)
        frames_a, truth_a = synthesize(spec)
        frames_b, truth_b = synthesize(spec)
        for fa, fb in zip(frames_a, frames_b):
            assert np.array_equal(fa.data, fb.data)
        assert np.array_equal(truth_a.dv, truth_b.dv)

    def test_opening_profile_is_the_designed_ramp(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=0)
        frames, truth = synthesize(spec)
        rest = truth.dv[0]
        assert np.all(truth.dv[: truth.active_start] == rest)
        assert np.all(truth.dv[truth.active_end + 1 :] == rest)
        peak = truth.dv.max()
        assert peak >= rest + 10
        peak_at = int(np.argmax(truth.dv))
        assert truth.active_start < peak_at < truth.active_end

    def test_stretch_and_narrow_profiles(self):
        _, bi = synthesize(SyntheticUtteranceSpec(label="bi", rng_seed=0))
        assert bi.dh.max() > bi.dh[0] + 10
        _, bou = synthesize(SyntheticUtteranceSpec(label="bou", rng_seed=0))
        assert bou.dh.min() < bou.dh[0] - 10

    def test_forward_class_grows_dark_mask_and_da(self):
        spec = SyntheticUtteranceSpec(label="bou", rng_seed=1)
        frames, truth = synthesize(spec)
        areas = np.array([int(m.sum()) for m in truth.dark_masks])
        peak = int(np.argmax(areas))
        ramp = areas[truth.active_start : peak + 1]
        assert np.all(np.diff(ramp) >= 0)
        assert areas[peak] > 1.5 * areas[truth.active_start]
        # the features module sees the same growth on the rendered frames
        track = TrackResult.from_poi_sets(truth.poi_sets)
        feats = extract_track(frames, track, DarkParams(), fps=spec.fps)
        da = np.array([f.da for f in feats.frames])
        assert da[peak] > da[truth.active_start]

    def test_truth_pois_within_frame(self):
        for label in ("ba", "bi", "bou"):
            frames, truth = synthesize(SyntheticUtteranceSpec(label=label, rng_seed=2))
            for pois in truth.poi_sets:
                for _, p in pois.items():
                    assert frames[0].contains(p)


class TestSplit:
    def test_thirty_at_seventy_percent(self):
        labels = ["ba"] * 30 + ["bi"] * 30 + ["bou"] * 30
        train, test = split_indices(labels, 0.7, seed=0)
        for cls in ("ba", "bi", "bou"):
            assert sum(1 for i in train if labels[i] == cls) == 21
            assert sum(1 for i in test if labels[i] == cls) == 9
        assert sorted(train + test) == list(range(90))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            split_indices(["ba"] * 10, 0.7, seed=0)

    def test_tiny_class_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            split_indices(["ba", "bi", "bi"], 0.7, seed=0)

    def test_deterministic_given_seed(self):
        labels = ["ba"] * 10 + ["bi"] * 10
        assert split_indices(labels, 0.7, 5) == split_indices(labels, 0.7, 5)
        assert split_indices(labels, 0.7, 5) != split_indices(labels, 0.7, 6)


class TestManifest:
    def test_parses_labels_and_relative_paths(self, tmp_path):
        (tmp_path / "u0").mkdir()
        (tmp_path / "u1").mkdir()
        manifest = tmp_path / "corpus.txt"
        manifest.write_text("# corpus\nba,u0\nbi,u1\n")
        entries = load_manifest(manifest)
        assert entries == [("ba", tmp_path / "u0"), ("bi", tmp_path / "u1")]

    def test_malformed_line(self, tmp_path):
        manifest = tmp_path / "corpus.txt"
        manifest.write_text("ba u0\n")
        with pytest.raises(ValueError, match="malformed"):
            load_manifest(manifest)

    def test_empty_manifest(self, tmp_path):
        manifest = tmp_path / "corpus.txt"
        manifest.write_text("# nothing\n")
        with pytest.raises(ValueError, match="empty"):
            load_manifest(manifest)


def small_corpus(per_class, seed=3, **overrides):
    base = SyntheticUtteranceSpec(label="ba", jitter=0.1, **overrides)
    specs = make_corpus(per_class=per_class, base_spec=base, seed=seed)
    return [(label, synthesize(s)[0]) for label, s in specs]


class TestEvaluate:
    def test_noiseless_corpus_is_perfectly_separated(self):
        utterances = small_corpus(per_class=6, antialias=False)
        report = evaluate(utterances, 2.0 / 3.0, PipelineConfig(), seed=1)
        assert report.overall_rate == 1.0
        assert np.array_equal(report.matrix, np.diag([2, 2, 2]))

    def test_report_row_sums_match_test_counts(self):
        utterances = small_corpus(per_class=5, antialias=False)
        report = evaluate(utterances, 0.6, PipelineConfig(), seed=2)
        for i, label in enumerate(report.labels):
            assert report.matrix[i].sum() == report.test_counts[label]
        assert report.overall_rate == np.trace(report.matrix) / report.matrix.sum()

    def test_deterministic_reports(self):
        utterances = small_corpus(per_class=4, antialias=False,
                                  impulse_fraction=0.03, offset_mode="drift",
                                  offset_amplitude=8.0)
        a = evaluate(utterances, 0.5, PipelineConfig(), seed=7)
        b = evaluate(utterances, 0.5, PipelineConfig(), seed=7)
        assert a.to_text() == b.to_text()
        assert a.to_csv() == b.to_csv()

    def test_single_class_rejected(self):
        utterances = [("ba", frames) for _, frames in small_corpus(per_class=2)[:2]]
        with pytest.raises(ValueError, match="2 classes"):
            evaluate(utterances, 0.5, PipelineConfig(), seed=0)


class TestEvaluationReport:
    def test_text_and_csv_formats(self):
        report = EvaluationReport(
            labels=("ba", "bi", "bou"),
            matrix=np.array([[8, 2, 0], [1, 9, 0], [0, 0, 10]]),
            train_counts={"ba": 20, "bi": 20, "bou": 20},
            test_counts={"ba": 10, "bi": 10, "bou": 10},
        )
        text = report.to_text()
        assert "confusion matrix" in text
        assert "90.00%" in text  # overall: 27/30
        csv_text = report.to_csv()
        assert csv_text.splitlines()[0] == "true_label,ba,bi,bou,rate"
        assert "ba,8,2,0,0.800000" in csv_text

    def test_shape_validated(self):
        with pytest.raises(ValueError, match="shape"):
            EvaluationReport(
                labels=("ba", "bi"),
                matrix=np.zeros((3, 3), dtype=int),
                train_counts={},
                test_counts={},
            )
