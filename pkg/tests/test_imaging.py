import numpy as np
import pytest
from PIL import Image

from lipkit.imaging import (
    Frame,
    PixelPoint,
    extract_block,
    gradient_map,
    load_frame,
    load_sequence,
    save_frame,
)


def make_frame(h=40, w=60, value=128.0):
    return Frame(np.full((h, w), value))


def sobel_oracle(data):
    """Per-pixel 3x3 Sobel with replicated borders, written as plain loops."""
    h, w = data.shape
    out = np.zeros((h, w))
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    for y in range(h):
        for x in range(w):
            gx = gy = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    gx += kx[dy + 1][dx + 1] * data[yy, xx]
                    gy += ky[dy + 1][dx + 1] * data[yy, xx]
            out[y, x] = gx * gx + gy * gy
    return out


class TestFrame:
    def test_rejects_out_of_range_luminance(self):
        with pytest.raises(ValueError):
            Frame(np.full((4, 4), 300.0))
        with pytest.raises(ValueError):
            Frame(np.full((4, 4), -1.0))

    def test_rejects_non_finite(self):
        data = np.full((4, 4), 10.0)
        data[1, 1] = np.nan
        with pytest.raises(ValueError):
            Frame(data)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            Frame(np.zeros((3, 3, 3)))

    def test_data_is_frozen(self):
        f = make_frame()
        with pytest.raises(ValueError):
            f.data[0, 0] = 1.0


class TestGradientMap:
    def test_constant_frame_is_zero(self):
        g = gradient_map(make_frame(value=128.0))
        assert np.all(g.magnitude_sq == 0.0)

    def test_vertical_step_edge(self):
        data = np.zeros((20, 30))
        data[:, 15:] = 255.0
        g = gradient_map(Frame(data)).magnitude_sq
        # strongest response hugs the step, none far from it
        assert g[:, 14].max() > 0 and g[:, 15].max() > 0
        assert np.all(g[:, :12] == 0.0)
        assert np.all(g[:, 18:] == 0.0)
        assert g[10, 14] == g[:, 14].max() == (4 * 255.0) ** 2

    def test_matches_loop_oracle_exactly_on_ring(self):
        yy, xx = np.mgrid[0:30, 0:40].astype(float)
        rho = ((xx - 20) / 12.0) ** 2 + ((yy - 15) / 8.0) ** 2
        data = np.where((rho > 0.8) & (rho < 1.2), 220.0, 30.0)
        g = gradient_map(Frame(data)).magnitude_sq
        oracle = sobel_oracle(data)
        assert np.array_equal(g, oracle)
        ring = (rho > 0.75) & (rho < 1.3)
        interior = rho <= 0.6
        assert g[ring].max() >= 10.0 * max(g[interior].mean(), 1e-12)

    def test_invariant_under_constant_offset(self):
        # integer luminances keep the +30 shift exact in float64
        rng = np.random.default_rng(5)
        data = rng.integers(0, 226, (25, 35)).astype(float)
        a = gradient_map(Frame(data)).magnitude_sq
        b = gradient_map(Frame(data + 30.0)).magnitude_sq
        assert np.array_equal(a, b)


class TestExtractBlock:
    def test_interior_exact_copy(self):
        rng = np.random.default_rng(1)
        data = rng.uniform(0, 255, (40, 60))
        f = Frame(data)
        b = extract_block(f, PixelPoint(30, 20), 7)
        assert not b.clamped
        assert b.center == PixelPoint(30, 20)
        assert np.array_equal(b.pixels, data[17:24, 27:34])

    def test_corner_center_is_clamped(self):
        f = make_frame(40, 60)
        b = extract_block(f, PixelPoint(0, 0), 11)
        assert b.clamped
        assert b.anchor == PixelPoint(0, 0)
        assert b.center == PixelPoint(5, 5)

    def test_even_size_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            extract_block(make_frame(), PixelPoint(10, 10), 4)

    def test_oversized_block_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            extract_block(make_frame(10, 10), PixelPoint(5, 5), 11)

    def test_write_back_identity(self):
        rng = np.random.default_rng(2)
        data = rng.uniform(0, 255, (30, 30))
        b = extract_block(Frame(data), PixelPoint(12, 9), 5)
        copy = data.copy()
        copy[b.anchor.y : b.anchor.y + 5, b.anchor.x : b.anchor.x + 5] = b.pixels
        assert np.array_equal(copy, data)


class TestSequenceIO:
    def test_directory_roundtrip_in_name_order(self, tmp_path):
        rng = np.random.default_rng(3)
        originals = []
        for i in range(5):
            data = np.round(rng.uniform(0, 255, (20, 24)))
            originals.append(data)
            save_frame(Frame(data), tmp_path / f"frame_{i:03d}.pgm")
        frames = load_sequence(tmp_path)
        assert len(frames) == 5
        for data, f in zip(originals, frames):
            assert np.array_equal(f.data, data)

    def test_manifest_order(self, tmp_path):
        for i, v in enumerate([10.0, 20.0, 30.0]):
            save_frame(Frame(np.full((8, 8), v)), tmp_path / f"f{i}.pgm")
        manifest = tmp_path / "seq.txt"
        manifest.write_text("f2.pgm\nf0.pgm\nf1.pgm\n")
        frames = load_sequence(manifest)
        assert [f.data[0, 0] for f in frames] == [30.0, 10.0, 20.0]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ValueError, match="no frames found"):
            load_sequence(tmp_path)

    def test_missing_path(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_sequence(tmp_path / "nowhere")

    def test_mixed_dimensions_names_offender(self, tmp_path):
        save_frame(Frame(np.zeros((8, 8))), tmp_path / "a.pgm")
        save_frame(Frame(np.zeros((9, 8))), tmp_path / "b.pgm")
        with pytest.raises(ValueError, match="b.pgm"):
            load_sequence(tmp_path)

    def test_16bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.fromarray(np.zeros((8, 8), dtype=np.uint16)).save(path)
        with pytest.raises(ValueError, match="bit depth"):
            load_frame(path)

    def test_color_png_converted_with_luma_weights(self, tmp_path):
        rng = np.random.default_rng(4)
        rgb = rng.integers(0, 256, (12, 16, 3), dtype=np.uint8)
        path = tmp_path / "color.png"
        Image.fromarray(rgb, mode="RGB").save(path)
        f = load_frame(path)
        expected = np.rint(
            0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
        )
        assert np.array_equal(f.data, expected)

    def test_png_roundtrip(self, tmp_path):
        data = np.round(np.random.default_rng(6).uniform(0, 255, (10, 12)))
        save_frame(Frame(data), tmp_path / "x.png")
        assert np.array_equal(load_frame(tmp_path / "x.png").data, data)
