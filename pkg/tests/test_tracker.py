import numpy as np
import pytest

from lipkit.corpus import SyntheticUtteranceSpec, synthesize
from lipkit.imaging import Block, Frame, PixelPoint, extract_block
from lipkit.snake import PoiSet
from lipkit.tracker import (
    FREEMAN_DIRECTIONS,
    Accumulator,
    Candidate,
    TrackerParams,
    generate_candidates,
    pixel_distances,
    track_sequence,
    track_sequence_baseline,
    vote,
)


def smooth_texture(h, w, seed):
    """Random field box-blurred twice: structure at several scales."""
    rng = np.random.default_rng(seed)
    tex = rng.uniform(0, 255, (h, w))
    for _ in range(2):
        p = np.pad(tex, 1, mode="edge")
        tex = sum(p[i : i + h, j : j + w] for i in range(3) for j in range(3)) / 9.0
    lo, hi = tex.min(), tex.max()
    return 10.0 + 235.0 * (tex - lo) / (hi - lo)


def translation_frames(big, num_frames, dx, dy, h, w, impulse=0.0, seed=0):
    """Crop a moving window from a static field: content shifts by (-dx, -dy)."""
    rng = np.random.default_rng(seed)
    frames = []
    for t in range(num_frames):
        img = np.array(big[t * dy : t * dy + h, t * dx : t * dx + w])
        if impulse:
            flat = img.reshape(-1)
            idx = rng.choice(flat.size, size=int(impulse * flat.size), replace=False)
            flat[idx] = np.where(rng.random(len(idx)) < 0.5, 0.0, 255.0)
        frames.append(Frame(img))
    return frames


TEXTURE_SEED_POIS = PoiSet(
    left_corner=PixelPoint(100, 90),
    right_corner=PixelPoint(140, 90),
    upper_center=PixelPoint(120, 76),
    lower_center=PixelPoint(120, 104),
)


def block_from_array(arr, anchor=(0, 0)):
    arr = np.asarray(arr, dtype=float)
    return Block(anchor=PixelPoint(*anchor), size=arr.shape[0], pixels=arr)


class TestDirections:
    def test_eight_distinct_unit_offsets(self):
        offsets = {d.offset for d in FREEMAN_DIRECTIONS}
        assert len(FREEMAN_DIRECTIONS) == 8
        assert offsets == {
            (dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)
        }

    def test_codes_are_sequential(self):
        assert [d.code for d in FREEMAN_DIRECTIONS] == list(range(8))


class TestGenerateCandidates:
    def test_interior_point_full_lattice(self):
        params = TrackerParams(steps=10, include_stationary=False)
        cands = generate_candidates(PixelPoint(50, 50), params, 120, 120)
        assert len(cands) == 80
        assert len({c.center for c in cands}) == 80

    def test_corner_point_clamped_and_deduplicated(self):
        params = TrackerParams(steps=10)
        cands = generate_candidates(PixelPoint(0, 0), params, 120, 120)
        assert len(cands) < 80
        assert all(0 <= c.center.x < 120 and 0 <= c.center.y < 120 for c in cands)
        assert len({c.center for c in cands}) == len(cands)

    def test_single_step_with_stationary_is_nine(self):
        params = TrackerParams(steps=1, include_stationary=True)
        cands = generate_candidates(PixelPoint(50, 50), params, 120, 120)
        assert len(cands) == 9
        centers = {c.center for c in cands}
        assert centers == {
            PixelPoint(50 + dx, 50 + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
        }
        assert cands[-1].direction is None and cands[-1].step == 0


class TestPixelDistances:
    def test_identical_blocks_zero(self):
        b = block_from_array(np.full((5, 5), 77.0))
        assert np.all(pixel_distances(b, b) == 0.0)

    def test_constant_offset(self):
        a = block_from_array(np.full((5, 5), 100.0))
        b = block_from_array(np.full((5, 5), 130.0))
        assert np.all(pixel_distances(a, b) == 30.0)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(9)
        a = rng.uniform(0, 255, (7, 7))
        b = rng.uniform(0, 255, (7, 7))
        row = pixel_distances(block_from_array(a), block_from_array(b))
        oracle = np.array([abs(a[i, j] - b[i, j]) for i in range(7) for j in range(7)])
        assert np.array_equal(row, oracle)

    def test_size_mismatch_rejected(self):
        a = block_from_array(np.zeros((5, 5)))
        b = block_from_array(np.zeros((7, 7)))
        with pytest.raises(ValueError, match="size"):
            pixel_distances(a, b)


def make_accumulator(dist_rows, origin=(50, 50), centers=None):
    rows = np.asarray(dist_rows, dtype=float)
    n = rows.shape[0]
    if centers is None:
        centers = [(51 + k, 50) for k in range(n)]
    cands = [Candidate(center=PixelPoint(*c), direction=0, step=k + 1) for k, c in enumerate(centers)]
    return Accumulator(origin=PixelPoint(*origin), candidates=cands, distances=rows)


class TestVote:
    def test_single_candidate_takes_every_pixel(self):
        acc = make_accumulator(np.random.default_rng(0).uniform(0, 50, (1, 9)))
        assert vote(acc) == 0
        assert acc.votes[0] == 9

    def test_dominating_candidate_sweeps(self):
        rng = np.random.default_rng(1)
        base = rng.uniform(10, 20, 9)
        acc = make_accumulator(np.stack([base, base + 5.0]))
        assert vote(acc) == 0
        assert acc.votes[0] == 9 and acc.votes[1] == 0

    def test_three_way_count_matches_brute_force(self):
        # candidate 0 wins 5 pixel columns, candidate 1 wins 4, candidate 2 none
        rows = np.full((3, 9), 50.0)
        rows[0, :5] = 1.0
        rows[1, 5:] = 2.0
        rows[2] += 10.0
        acc = make_accumulator(rows)
        winner = vote(acc)
        counts = [0, 0, 0]
        for col in range(9):
            m = rows[:, col].min()
            for j in range(3):
                if rows[j, col] == m:
                    counts[j] += 1
        assert counts == [5, 4, 0]
        assert winner == 0
        assert list(acc.votes) == counts

    def test_empty_accumulator_rejected(self):
        acc = Accumulator(
            origin=PixelPoint(0, 0), candidates=[], distances=np.zeros((0, 9))
        )
        with pytest.raises(ValueError, match="empty"):
            vote(acc)

    def test_reorder_invariance_without_ties(self):
        rng = np.random.default_rng(2)
        rows = rng.uniform(1, 100, (6, 25))
        rows[3] = 0.5  # unique winner
        acc = make_accumulator(rows)
        winner_center = acc.candidates[vote(acc)].center
        order = rng.permutation(6)
        acc2 = make_accumulator(rows[order], centers=[(51 + int(k), 50) for k in order])
        assert acc2.candidates[vote(acc2)].center == winner_center

    def test_dominated_candidate_never_changes_winner(self):
        rng = np.random.default_rng(3)
        rows = rng.uniform(1, 100, (5, 25))
        acc = make_accumulator(rows)
        winner = vote(acc)
        dominated = rows.min(axis=0) + 1.0  # strictly above some existing row everywhere
        rows2 = np.vstack([rows, dominated])
        acc2 = make_accumulator(rows2)
        assert vote(acc2) == winner
        assert np.array_equal(acc2.votes[:5], acc.votes)

    def test_column_votes_count_every_attaining_candidate(self):
        rng = np.random.default_rng(4)
        rows = np.round(rng.uniform(0, 4, (7, 16)))  # plenty of exact ties
        acc = make_accumulator(rows)
        vote(acc)
        col_min = rows.min(axis=0)
        per_column = (rows == col_min).sum(axis=0)
        assert acc.votes.sum() == per_column.sum()
        assert acc.votes.sum() >= 16

    def test_strict_dominator_matches_ssd_winner(self):
        rng = np.random.default_rng(5)
        rows = rng.uniform(10, 100, (6, 25))
        rows[2] = rng.uniform(0, 9, 25)  # strictly smallest at every pixel
        acc = make_accumulator(rows)
        assert vote(acc) == 2
        assert int(np.argmin((rows * rows).sum(axis=1))) == 2


class TestTrackSequence:
    def test_static_scene_stays_put(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=0)
        frames, truth = synthesize(spec)
        static = [frames[0]] * 12
        res = track_sequence(static, truth.poi_sets[0], TrackerParams())
        for pois in res.poi_sets:
            assert dict(pois.items()) == dict(truth.poi_sets[0].items())
        for move in res.moves:
            assert all(m.direction is None and m.step == 0 for m in move.values())

    @pytest.mark.parametrize("dx,dy", [(2, 2), (3, 0), (0, 2)])
    def test_noiseless_translation_recovered_exactly(self, dx, dy):
        T, H, W = 31, 120, 160
        big = smooth_texture(H + T * dy, W + T * dx, seed=11)
        frames = translation_frames(big, T, dx, dy, H, W)
        res = track_sequence(frames, TEXTURE_SEED_POIS, TrackerParams())
        for t in range(T):
            for name, p in res.poi_sets[t].items():
                p0 = dict(TEXTURE_SEED_POIS.items())[name]
                assert (p.x, p.y) == (p0.x - t * dx, p0.y - t * dy)

    def test_impulse_noise_error_within_one_pixel(self):
        T, H, W, dx, dy = 31, 120, 160, 2, 2
        big = smooth_texture(H + T * dy, W + T * dx, seed=11)
        frames = translation_frames(big, T, dx, dy, H, W, impulse=0.10, seed=13)
        res = track_sequence(frames, TEXTURE_SEED_POIS, TrackerParams())
        for t in range(T):
            for name, p in res.poi_sets[t].items():
                p0 = dict(TEXTURE_SEED_POIS.items())[name]
                err = max(abs(p.x - (p0.x - t * dx)), abs(p.y - (p0.y - t * dy)))
                assert err <= 1

    def test_velocity_bounded_by_lattice(self):
        spec = SyntheticUtteranceSpec(label="bi", rng_seed=3, jitter=0.1,
                                      impulse_fraction=0.08)
        frames, truth = synthesize(spec)
        params = TrackerParams(steps=10)
        res = track_sequence(frames, truth.poi_sets[0], params)
        for prev, cur in zip(res.poi_sets, res.poi_sets[1:]):
            for name, p in cur.items():
                q = dict(prev.items())[name]
                assert max(abs(p.x - q.x), abs(p.y - q.y)) <= params.steps

    def test_needs_two_frames(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=0)
        frames, truth = synthesize(spec)
        with pytest.raises(ValueError, match="2 frames"):
            track_sequence(frames[:1], truth.poi_sets[0], TrackerParams())


class TestBaselines:
    def test_noiseless_translation_matches_voting(self):
        T, H, W, dx, dy = 12, 120, 160, 2, 2
        big = smooth_texture(H + T * dy, W + T * dx, seed=21)
        frames = translation_frames(big, T, dx, dy, H, W)
        params = TrackerParams()
        ref = track_sequence(frames, TEXTURE_SEED_POIS, params)
        for method in ("ssd", "ncc"):
            res = track_sequence_baseline(frames, TEXTURE_SEED_POIS, params, method)
            assert [dict(p.items()) for p in res.poi_sets] == [
                dict(p.items()) for p in ref.poi_sets
            ]

    def test_identical_pair_zero_displacement(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=1)
        frames, truth = synthesize(spec)
        pair = [frames[0], frames[0]]
        for method in ("ssd", "ncc"):
            res = track_sequence_baseline(pair, truth.poi_sets[0], TrackerParams(), method)
            assert dict(res.poi_sets[1].items()) == dict(truth.poi_sets[0].items())

    def test_unknown_method_rejected(self):
        spec = SyntheticUtteranceSpec(label="ba", rng_seed=1)
        frames, truth = synthesize(spec)
        with pytest.raises(ValueError, match="baseline"):
            track_sequence_baseline(frames[:3], truth.poi_sets[0], TrackerParams(), "sad")

    def test_luminance_offsets_favor_voting_on_lower_lip(self):
        # alternating global offsets: the voting tracker should do at least
        # as well as whole-block SSD/NCC on the articulating lower lip
        params = TrackerParams()
        errors = {"vote": [], "ssd": [], "ncc": []}
        for seed in range(4):
            spec = SyntheticUtteranceSpec(
                label="ba", rng_seed=seed, jitter=0.1,
                offset_mode="alternating", offset_amplitude=30.0, antialias=False,
            )
            frames, truth = synthesize(spec)
            seed_pois = truth.poi_sets[0]
            runs = {
                "vote": track_sequence(frames, seed_pois, params),
                "ssd": track_sequence_baseline(frames, seed_pois, params, "ssd"),
                "ncc": track_sequence_baseline(frames, seed_pois, params, "ncc"),
            }
            for key, res in runs.items():
                errors[key].append(
                    np.mean(
                        [
                            np.hypot(
                                p.lower_center.x - q.lower_center.x,
                                p.lower_center.y - q.lower_center.y,
                            )
                            for p, q in zip(res.poi_sets, truth.poi_sets)
                        ]
                    )
                )
        assert np.mean(errors["vote"]) <= np.mean(errors["ssd"])
        assert np.mean(errors["vote"]) <= np.mean(errors["ncc"])
