"""Grayscale frame handling: sequence I/O, gradients, and block extraction."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

# BT.601 luminance weights used when converting color inputs.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)
_FRAME_SUFFIXES = (".pgm", ".png")
_UNSUPPORTED_MODES = ("I", "I;16", "I;16B", "I;16L", "I;16N", "F")


class PixelPoint(NamedTuple):
    """Integer pixel coordinates; x is the column, y is the row."""

    x: int
    y: int


@dataclass(frozen=True)
class Frame:
    """Single-channel luminance raster with values in [0, 255].

    The pixel array is frozen after construction, so frames can be shared
    freely between concurrent workers.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("frame data must be a non-empty 2-D array")
        if not np.isfinite(arr).all():
            raise ValueError("frame data must be finite")
        if arr.min() < 0.0 or arr.max() > 255.0:
            raise ValueError("luminance values must lie in [0, 255]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def contains(self, p: PixelPoint) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height


@dataclass(frozen=True)
class GradientMap:
    """Per-pixel squared gradient magnitude of a frame."""

    magnitude_sq: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.magnitude_sq, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("gradient data must be a non-empty 2-D array")
        if arr.min() < 0.0:
            raise ValueError("squared gradient magnitudes must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "magnitude_sq", arr)

    @property
    def width(self) -> int:
        return self.magnitude_sq.shape[1]

    @property
    def height(self) -> int:
        return self.magnitude_sq.shape[0]


@dataclass(frozen=True)
class Block:
    """Square patch of luminances copied out of a frame.

    ``anchor`` is the top-left pixel of the patch in frame coordinates;
    ``clamped`` records whether the requested center had to be moved to keep
    the patch inside the frame.
    """

    anchor: PixelPoint
    size: int
    pixels: np.ndarray
    clamped: bool = False

    def __post_init__(self) -> None:
        if self.size % 2 == 0 or self.size < 3:
            raise ValueError("block size must be odd and >= 3")
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.shape != (self.size, self.size):
            raise ValueError("block pixel array must be size x size")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def center(self) -> PixelPoint:
        half = self.size // 2
        return PixelPoint(self.anchor.x + half, self.anchor.y + half)


def gradient_map(frame: Frame) -> GradientMap:
    """Squared magnitude of the 3x3 Sobel gradient, edges replicated."""
    p = np.pad(frame.data, 1, mode="edge")
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    )
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    return GradientMap(gx * gx + gy * gy)


def clamp_block_center(
    center: PixelPoint, size: int, width: int, height: int
) -> PixelPoint:
    """Move ``center`` the minimal amount so a size x size block fits."""
    half = size // 2
    x = min(max(center.x, half), width - 1 - half)
    y = min(max(center.y, half), height - 1 - half)
    return PixelPoint(x, y)


def extract_block(frame: Frame, center: PixelPoint, size: int) -> Block:
    """Copy the size x size patch centered on ``center``.

    Centers too close to the border are clamped inward so the whole patch
    stays in-frame; the returned block records whether that happened.
    """
    if size % 2 == 0:
        raise ValueError("block size must be odd")
    if size < 3:
        raise ValueError("block size must be >= 3")
    if size > min(frame.width, frame.height):
        raise ValueError(
            f"block size {size} exceeds frame dimensions "
            f"{frame.width}x{frame.height}"
        )
    fitted = clamp_block_center(center, size, frame.width, frame.height)
    half = size // 2
    anchor = PixelPoint(fitted.x - half, fitted.y - half)
    pixels = frame.data[anchor.y : anchor.y + size, anchor.x : anchor.x + size]
    return Block(anchor=anchor, size=size, pixels=pixels, clamped=fitted != center)


def _to_luminance(img: Image.Image, path: Path) -> np.ndarray:
    if img.mode in _UNSUPPORTED_MODES:
        raise ValueError(f"unsupported bit depth in {path}: only 8-bit input is handled")
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64)
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    r, g, b = _LUMA_WEIGHTS
    return np.rint(rgb[:, :, 0] * r + rgb[:, :, 1] * g + rgb[:, :, 2] * b)


def load_frame(path: str | Path) -> Frame:
    """Load one PGM (binary) or PNG frame as a luminance Frame."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"frame file not found: {path}")
    try:
        with Image.open(path) as img:
            data = _to_luminance(img, path)
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot decode frame {path}: {exc}") from exc
    return Frame(data)


def _sequence_paths(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(
            p for p in path.iterdir() if p.suffix.lower() in _FRAME_SUFFIXES
        )
    if path.is_file():
        paths = []
        for raw in path.read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            entry = Path(line)
            if not entry.is_absolute():
                entry = path.parent / entry
            paths.append(entry)
        return paths
    raise FileNotFoundError(f"sequence path not found: {path}")


def load_sequence(path: str | Path) -> list[Frame]:
    """Load an ordered frame sequence.

    ``path`` is either a directory (all .pgm/.png files, lexicographic order)
    or a manifest file with one frame path per line (relative paths resolve
    against the manifest's directory).
    """
    path = Path(path)
    paths = _sequence_paths(path)
    if not paths:
        raise ValueError(f"no frames found in {path}")
    frames = [load_frame(p) for p in paths]
    first = frames[0]
    for p, f in zip(paths[1:], frames[1:]):
        if (f.width, f.height) != (first.width, first.height):
            raise ValueError(
                f"frame size mismatch: {paths[0]} is {first.width}x{first.height} "
                f"but {p} is {f.width}x{f.height}"
            )
    return frames


def save_frame(frame: Frame, path: str | Path) -> None:
    """Write a frame as binary PGM or 8-bit grayscale PNG, by extension."""
    path = Path(path)
    data = np.rint(frame.data).astype(np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
        path.write_bytes(header + data.tobytes())
    elif suffix == ".png":
        Image.fromarray(data, mode="L").save(path)
    else:
        raise ValueError(f"unsupported frame format: {path.suffix}")
