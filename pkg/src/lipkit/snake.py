"""Outer lip contour localization with a greedy active contour.

The contour is a closed ring of integer pixel vertices. Each sweep moves
every vertex to the cheapest position inside its local search window, where
the cost combines an internal smoothness term, an image term that pulls
toward strong gradients, and a constraint term that pulls toward the ring
centroid. All three terms are min-max rescaled to [0, 1] over the window
before the weighted sum; their raw scales are incommensurate and an
unscaled term would silence the others.

The move cost's tension term is the greedy-snake continuity form: the
deviation of both incident edge lengths from the ring's current mean
spacing. Raw edge length instead would reward shrinking straight through
image edges, a single-edge term makes every vertex chase its successor so
the ring spins forever, and plain symmetric length lets vertices slide
along a contour and pile up where the centroid pull is weakest. Deviation
from mean spacing permits uniform contraction while resisting all three
failure modes. Sweeps stop when nothing moves, i.e. no single-vertex
window move improves its cost, or when the sweep budget runs out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import Frame, GradientMap, PixelPoint, gradient_map


@dataclass(frozen=True)
class SnakeParams:
    """Tuning knobs for the greedy contour descent."""

    num_vertices: int = 40
    alpha: float = 1.0  # first-derivative (tension) weight
    beta: float = 1.0  # second-derivative (rigidity) weight
    centroid_weight: float = 0.5
    search_radius: int = 2  # half-width of the per-vertex search window
    max_sweeps: int = 200

    def __post_init__(self) -> None:
        if self.num_vertices < 8:
            raise ValueError("contour needs at least 8 vertices")
        if self.alpha < 0 or self.beta < 0 or self.centroid_weight < 0:
            raise ValueError("energy weights must be non-negative")
        if self.search_radius < 1:
            raise ValueError("search radius must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("sweep budget must be >= 1")


@dataclass(frozen=True)
class SnakeContour:
    """Closed vertex ring plus the raw total energy at those positions.

    ``sweeps`` and ``converged`` describe the minimization run that produced
    the contour; both stay at their defaults for hand-built rings.
    """

    vertices: tuple[PixelPoint, ...]
    total_energy: float | None = None
    sweeps: int = 0
    converged: bool = False

    def __post_init__(self) -> None:
        if len(self.vertices) < 8:
            raise ValueError("contour needs at least 8 vertices")
        object.__setattr__(self, "vertices", tuple(PixelPoint(*v) for v in self.vertices))

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class PoiSet:
    """The four tracked lip landmarks, with the optional upper-lip bow triple."""

    left_corner: PixelPoint
    right_corner: PixelPoint
    upper_center: PixelPoint
    lower_center: PixelPoint
    cupid_bow: tuple[PixelPoint, PixelPoint, PixelPoint] | None = None

    def __post_init__(self) -> None:
        if self.left_corner.x >= self.right_corner.x:
            raise ValueError("left corner must lie strictly left of right corner")
        if self.upper_center.y >= self.lower_center.y:
            raise ValueError("upper center must lie strictly above lower center")

    def items(self) -> tuple[tuple[str, PixelPoint], ...]:
        return (
            ("left_corner", self.left_corner),
            ("right_corner", self.right_corner),
            ("upper_center", self.upper_center),
            ("lower_center", self.lower_center),
        )


POI_NAMES = ("left_corner", "right_corner", "upper_center", "lower_center")


def ellipse_ring(
    cx: float, cy: float, rx: float, ry: float, num_vertices: int = 40
) -> SnakeContour:
    """Build an elliptical initial ring (the usual seed around the mouth)."""
    if rx <= 0 or ry <= 0:
        raise ValueError("ellipse radii must be positive")
    angles = 2.0 * math.pi * np.arange(num_vertices) / num_vertices
    xs = np.rint(cx + rx * np.cos(angles)).astype(int)
    ys = np.rint(cy + ry * np.sin(angles)).astype(int)
    return SnakeContour(tuple(PixelPoint(int(x), int(y)) for x, y in zip(xs, ys)))


def internal_energy(
    prev: PixelPoint, v: PixelPoint, nxt: PixelPoint, params: SnakeParams
) -> float:
    """Smoothness cost at one vertex: alpha*|V'| + beta*|V''|.

    The derivatives are finite differences over the ring: |V'| is the
    distance to the next vertex and |V''| the norm of prev - 2v + next.
    """
    d1 = math.hypot(nxt.x - v.x, nxt.y - v.y)
    d2 = math.hypot(prev.x - 2 * v.x + nxt.x, prev.y - 2 * v.y + nxt.y)
    return params.alpha * d1 + params.beta * d2


def ring_centroid(vertices: tuple[PixelPoint, ...]) -> tuple[float, float]:
    xs = [v.x for v in vertices]
    ys = [v.y for v in vertices]
    return sum(xs) / len(xs), sum(ys) / len(ys)


def constraint_energy(v: PixelPoint, centroid: tuple[float, float]) -> float:
    """Euclidean distance from a vertex to the ring's gravity center."""
    return math.hypot(v.x - centroid[0], v.y - centroid[1])


def total_energy(
    vertices: tuple[PixelPoint, ...], grad: GradientMap, params: SnakeParams
) -> float:
    """Raw three-term energy summed over the ring.

    This is the unnormalized sum (smoothness + negative squared gradient +
    centroid distance); the per-window rescaling used during descent does
    not apply here.
    """
    n = len(vertices)
    centroid = ring_centroid(vertices)
    tot = 0.0
    for i, v in enumerate(vertices):
        prev = vertices[i - 1]
        nxt = vertices[(i + 1) % n]
        e_int = internal_energy(prev, v, nxt, params)
        e_ext = -float(grad.magnitude_sq[v.y, v.x])
        tot += e_int + e_ext + constraint_energy(v, centroid)
    return tot


def _normalized(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    span = values.max() - lo
    if span <= 0.0:
        return np.zeros_like(values)
    return (values - lo) / span


def minimize(frame: Frame, initial: SnakeContour, params: SnakeParams) -> SnakeContour:
    """Run greedy window descent until no vertex moves or the budget is hit."""
    verts = np.array([[v.x, v.y] for v in initial.vertices], dtype=np.int64)
    if np.all(verts == verts[0]):
        raise ValueError("degenerate initial contour: all vertices coincide")
    n = len(verts)
    grad = gradient_map(frame)
    g = grad.magnitude_sq
    r = params.search_radius
    width, height = frame.width, frame.height

    sweeps = 0
    converged = False
    for sweep in range(1, params.max_sweeps + 1):
        sweeps = sweep
        moved = False
        cx, cy = verts[:, 0].mean(), verts[:, 1].mean()
        edges = np.hypot(*(np.roll(verts, -1, axis=0) - verts).T)
        mean_spacing = edges.mean()
        for i in range(n):
            x0, y0 = int(verts[i, 0]), int(verts[i, 1])
            xs = np.arange(max(0, x0 - r), min(width - 1, x0 + r) + 1)
            ys = np.arange(max(0, y0 - r), min(height - 1, y0 + r) + 1)
            gx, gy = np.meshgrid(xs, ys)
            gx = gx.ravel()
            gy = gy.ravel()

            # Image term: -|grad|^2 rescaled to [0, 1] over the window.
            e_ext = _normalized(-g[gy, gx])
            e_cont = _normalized(np.hypot(gx - cx, gy - cy))

            px, py = verts[i - 1]
            nx, ny = verts[(i + 1) % n]
            tension = 0.5 * (
                np.abs(np.hypot(gx - px, gy - py) - mean_spacing)
                + np.abs(np.hypot(nx - gx, ny - gy) - mean_spacing)
            )
            bend = np.hypot(px - 2 * gx + nx, py - 2 * gy + ny)
            e_int = _normalized(params.alpha * tension + params.beta * bend)
            energy = e_int + e_ext + params.centroid_weight * e_cont

            cur = int(np.flatnonzero((gx == x0) & (gy == y0))[0])
            best = int(np.argmin(energy))
            if energy[best] < energy[cur]:
                verts[i, 0] = gx[best]
                verts[i, 1] = gy[best]
                moved = True
        if not moved:
            converged = True
            break

    ring = tuple(PixelPoint(int(x), int(y)) for x, y in verts)
    return SnakeContour(
        vertices=ring,
        total_energy=total_energy(ring, grad, params),
        sweeps=sweeps,
        converged=converged,
    )


def _local_y_minima(ys: np.ndarray, center: int, reach: int) -> tuple[int | None, int | None]:
    """Nearest strict local minima of y on each side of ``center`` (ring indexing)."""
    n = len(ys)

    def is_min(k: int) -> bool:
        return ys[k] < ys[(k - 1) % n] and ys[k] < ys[(k + 1) % n]

    left = next((k % n for k in range(center - 1, center - reach - 1, -1) if is_min(k % n)), None)
    right = next((k % n for k in range(center + 1, center + reach + 1) if is_min(k % n)), None)
    return left, right


def extract_pois(contour: SnakeContour) -> PoiSet:
    """Derive the lip landmarks by projecting the ring onto the two axes.

    The horizontal extremes give the mouth corners, the lowest vertex the
    lower lip center. The topmost vertex is the upper center; if it has a
    strict local y-minimum on each side within n/8 ring steps, the three
    points are reported together as the upper-lip bow.
    """
    verts = contour.vertices
    xs = np.array([v.x for v in verts])
    ys = np.array([v.y for v in verts])
    if xs.max() == xs.min() or ys.max() == ys.min():
        raise ValueError("degenerate contour: zero extent along an axis")

    def extreme(primary: np.ndarray, other: np.ndarray, highest: bool) -> int:
        # Flat contours tie on the extreme coordinate; take the tied vertex
        # nearest the tie group's center so plateaus resolve to their middle.
        target = primary.max() if highest else primary.min()
        tied = np.flatnonzero(primary == target)
        centered = tied[np.argmin(np.abs(other[tied] - other[tied].mean()))]
        return int(centered)

    left = verts[extreme(xs, ys, highest=False)]
    right = verts[extreme(xs, ys, highest=True)]
    lower = verts[extreme(ys, xs, highest=True)]
    top_idx = extreme(ys, xs, highest=False)
    upper = verts[top_idx]

    reach = max(1, len(verts) // 8)
    li, ri = _local_y_minima(ys, top_idx, reach)
    bow = (verts[li], upper, verts[ri]) if li is not None and ri is not None else None

    return PoiSet(
        left_corner=left,
        right_corner=right,
        upper_center=upper,
        lower_center=lower,
        cupid_bow=bow,
    )
