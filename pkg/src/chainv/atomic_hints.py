"""Atomic geometric hints and their pixel regions.

Three hint shapes compete for each reasoning step: the principal-axis line
through the selected patch centers, the maximum-area triangle over the
selected patch corners, and the axis-aligned bounding box of the selected
patch rects. Each shape owns a pixel region used for attention scoring.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    EmptyInputError,
    RangeError,
    ShapeError,
)
from .trace_model import GridSpec, patch_center, token_index_to_patch_rect

EIGEN_GAP_FLOOR = 1e-12
DEFAULT_LINE_THICKNESS = 3
PIXEL_MAP_MODES = ("constant", "bilinear")

Point = tuple[float, float]
Rect = tuple[int, int, int, int]


def round_pixel(value: float) -> int:
    """Nearest integer pixel with halves rounding up, platform independent."""
    return int(math.floor(value + 0.5))


# ---------------------------------------------------------------------------
# hint construction
# ---------------------------------------------------------------------------


def principal_direction(points: np.ndarray) -> tuple[float, float]:
    """Unit principal axis of a 2-d point set.

    Uses the population covariance (divisor = point count) and the closed
    form for the 2x2 symmetric eigenproblem. The direction sign is fixed to
    a nonnegative x component, then nonnegative y when x is zero. When the
    eigenvalue gap is below ``EIGEN_GAP_FLOOR`` the spread is isotropic and
    the +x axis is returned.
    """
    pts = np.asarray(points, dtype=np.float64)
    mu = pts.mean(axis=0)
    dev = pts - mu
    cov = dev.T @ dev / pts.shape[0]
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    gap = math.sqrt((a - c) * (a - c) + 4.0 * b * b)
    if gap < EIGEN_GAP_FLOOR:
        return (1.0, 0.0)
    lam = 0.5 * ((a + c) + gap)
    if b == 0.0:
        vx, vy = (1.0, 0.0) if a >= c else (0.0, 1.0)
    else:
        # two algebraic eigenvector forms; the larger one is better conditioned
        u = (b, lam - a)
        w = (lam - c, b)
        vx, vy = u if u[0] * u[0] + u[1] * u[1] >= w[0] * w[0] + w[1] * w[1] else w
    norm = math.hypot(vx, vy)
    vx, vy = vx / norm, vy / norm
    if vx < 0.0 or (vx == 0.0 and vy < 0.0):
        vx, vy = -vx, -vy
    return (vx + 0.0, vy + 0.0)


def line_hint(centers) -> tuple[Point, Point]:
    """Extreme patch centers along the principal axis of the selection.

    Returns ``(low, high)`` ordered by projection onto the axis; ties keep
    the earliest center. Endpoints are always members of the input set.
    """
    pts = np.asarray(centers, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError("centers must be a [k, 2] array")
    if pts.shape[0] < 2:
        raise EmptyInputError("need at least 2 centers for a line")
    if np.all(pts == pts[0]):
        raise DegenerateGeometryError("all centers coincide; no line direction")
    dx, dy = principal_direction(pts)
    proj = pts[:, 0] * dx + pts[:, 1] * dy
    lo = int(np.argmin(proj))
    hi = int(np.argmax(proj))
    return ((float(pts[lo, 0]), float(pts[lo, 1])),
            (float(pts[hi, 0]), float(pts[hi, 1])))


def triangle_hint(rects) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
    """Maximum-area triangle over the corners of the selected patch rects.

    All corner triples are tried (at most 4k corners after deduplication).
    Area ties are broken by the lexicographically smallest sorted vertex
    list. Vertices come back counterclockwise (positive shoelace area in
    stored coordinates) starting from the smallest vertex.
    """
    rects = list(rects)
    if not rects:
        raise EmptyInputError("need at least one patch rect")
    corners = set()
    for x0, y0, x1, y1 in rects:
        corners.update(((x0, y0), (x1, y0), (x0, y1), (x1, y1)))
    ordered = sorted(corners)
    best = None
    best_area2 = 0
    # combinations over a sorted list appear in lexicographic order, so the
    # first triple reaching the maximum is already the tie-break winner
    for tri in itertools.combinations(ordered, 3):
        (ax, ay), (bx, by), (cx, cy) = tri
        area2 = abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
        if area2 > best_area2:
            best_area2 = area2
            best = tri
    if best is None:
        raise DegenerateGeometryError("all patch corners are collinear")
    a, b, c = best
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    return (a, b, c) if cross > 0 else (a, c, b)


def box_hint(rects) -> tuple[tuple[int, int], tuple[int, int]]:
    """Axis-aligned bounding box of the selected patch rects as (min, max)."""
    rects = list(rects)
    if not rects:
        raise EmptyInputError("need at least one patch rect")
    x0 = min(r[0] for r in rects)
    y0 = min(r[1] for r in rects)
    x1 = max(r[2] for r in rects)
    y1 = max(r[3] for r in rects)
    return ((x0, y0), (x1, y1))


# ---------------------------------------------------------------------------
# pixel regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Set of in-bounds pixels owned by one hint, in row-major order."""

    width: int
    height: int
    pixels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.pixels:
            raise EmptyInputError("region mask needs at least one pixel")
        for x, y in self.pixels:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise RangeError(f"mask pixel ({x},{y}) outside image")
        ordered = tuple(sorted(set(self.pixels), key=lambda p: (p[1], p[0])))
        object.__setattr__(self, "pixels", ordered)
        object.__setattr__(self, "_members", frozenset(ordered))

    @property
    def pixel_count(self) -> int:
        return len(self.pixels)

    def __contains__(self, pixel) -> bool:
        return pixel in self._members

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(ys, xs) arrays suitable for fancy-indexing an image array."""
        arr = np.asarray(self.pixels, dtype=np.intp)
        return arr[:, 1], arr[:, 0]


def chebyshev_segment_distance(point, start, end) -> float:
    """Chebyshev (max-axis) distance from a point to a closed segment.

    The distance as a function of the segment parameter is a maximum of two
    absolute linear terms, hence convex piecewise linear: the minimum sits
    at an endpoint, at a zero of either term, or where the terms cross.
    """
    ax = point[0] - start[0]
    ay = point[1] - start[1]
    dx = end[0] - start[0]
    dy = end[1] - start[1]
    candidates = [0.0, 1.0]
    if dx != 0.0:
        candidates.append(ax / dx)
    if dy != 0.0:
        candidates.append(ay / dy)
    if dx - dy != 0.0:
        candidates.append((ax - ay) / (dx - dy))
    if dx + dy != 0.0:
        candidates.append((ax + ay) / (dx + dy))
    best = math.inf
    for t in candidates:
        t = min(1.0, max(0.0, t))
        value = max(abs(ax - t * dx), abs(ay - t * dy))
        best = min(best, value)
    return best


def _box_mask_pixels(vertices, grid: GridSpec):
    (x0, y0), (x1, y1) = vertices
    if x0 > x1 or y0 > y1:
        raise RangeError("box corners must be ordered (min, max)")
    xs = range(max(x0, 0), min(x1, grid.image_w))
    ys = range(max(y0, 0), min(y1, grid.image_h))
    return [(x, y) for y in ys for x in xs]


def _triangle_mask_pixels(vertices, grid: GridSpec):
    (ax, ay), (bx, by), (cx, cy) = vertices
    orient = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
    if orient == 0:
        raise DegenerateGeometryError("triangle vertices are collinear")
    sign = 1.0 if orient > 0 else -1.0
    x_lo = max(int(math.floor(min(ax, bx, cx))), 0)
    x_hi = min(int(math.ceil(max(ax, bx, cx))), grid.image_w - 1)
    y_lo = max(int(math.floor(min(ay, by, cy))), 0)
    y_hi = min(int(math.ceil(max(ay, by, cy))), grid.image_h - 1)
    edges = (((ax, ay), (bx, by)), ((bx, by), (cx, cy)), ((cx, cy), (ax, ay)))
    pixels = []
    for y in range(y_lo, y_hi + 1):
        py = y + 0.5
        for x in range(x_lo, x_hi + 1):
            px = x + 0.5
            inside = True
            for (sx, sy), (ex, ey) in edges:
                # edge-inclusive half-plane test on the pixel center
                if sign * ((ex - sx) * (py - sy) - (px - sx) * (ey - sy)) < 0:
                    inside = False
                    break
            if inside:
                pixels.append((x, y))
    return pixels


def _line_mask_pixels(vertices, grid: GridSpec, thickness: int):
    (x0, y0), (x1, y1) = vertices
    radius = thickness / 2.0
    reach = int(math.ceil(radius))
    x_lo = max(int(math.floor(min(x0, x1))) - reach, 0)
    x_hi = min(int(math.ceil(max(x0, x1))) + reach, grid.image_w - 1)
    y_lo = max(int(math.floor(min(y0, y1))) - reach, 0)
    y_hi = min(int(math.ceil(max(y0, y1))) + reach, grid.image_h - 1)
    pixels = []
    for y in range(y_lo, y_hi + 1):
        for x in range(x_lo, x_hi + 1):
            if chebyshev_segment_distance((x, y), (x0, y0), (x1, y1)) <= radius:
                pixels.append((x, y))
    return pixels


def region_mask(kind: str, vertices, grid: GridSpec, *,
                line_thickness: int = DEFAULT_LINE_THICKNESS) -> RegionMask:
    """Rasterize one hint's pixel region.

    Boxes cover their half-open rect. Triangles take every pixel whose
    center passes the edge-inclusive half-plane tests. Lines take every
    pixel whose integer coordinate lies within Chebyshev distance
    ``line_thickness / 2`` of the segment.
    """
    if kind == "box":
        pixels = _box_mask_pixels(vertices, grid)
    elif kind == "triangle":
        pixels = _triangle_mask_pixels(vertices, grid)
    elif kind == "line":
        if line_thickness < 1:
            raise RangeError("line_thickness must be >= 1")
        pixels = _line_mask_pixels(vertices, grid, line_thickness)
    else:
        raise RangeError(f"unknown hint kind '{kind}'")
    if not pixels:
        raise DegenerateGeometryError(f"{kind} region rasterized to zero pixels")
    return RegionMask(width=grid.image_w, height=grid.image_h, pixels=tuple(pixels))


# ---------------------------------------------------------------------------
# pixel attention maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PixelAttentionMap:
    """Dense per-pixel attention image upsampled from token attention."""

    width: int
    height: int
    values: np.ndarray  # [height, width]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.height, self.width):
            raise ShapeError("values shape must be [height, width]")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _row_spans(grid: GridSpec) -> np.ndarray:
    edges = np.minimum(np.arange(1, grid.rows + 1) * grid.patch_h, grid.image_h)
    starts = np.arange(grid.rows) * grid.patch_h
    return edges - starts


def _col_spans(grid: GridSpec) -> np.ndarray:
    edges = np.minimum(np.arange(1, grid.cols + 1) * grid.patch_w, grid.image_w)
    starts = np.arange(grid.cols) * grid.patch_w
    return edges - starts


def _interp_axis(nodes: np.ndarray, samples: np.ndarray):
    """Clamped linear interpolation weights along one axis."""
    if nodes.shape[0] == 1:
        zeros = np.zeros(samples.shape[0], dtype=np.intp)
        return zeros, zeros, np.zeros(samples.shape[0])
    idx = np.clip(np.searchsorted(nodes, samples, side="right") - 1, 0, nodes.shape[0] - 2)
    span = nodes[idx + 1] - nodes[idx]
    weight = np.clip((samples - nodes[idx]) / span, 0.0, 1.0)
    return idx, idx + 1, weight


def pixel_attention_map(attention: np.ndarray, grid: GridSpec,
                        mode: str = "constant") -> PixelAttentionMap:
    """Upsample a token-level attention vector to the pixel grid.

    The default ``constant`` mode broadcasts each patch value over its
    clipped rect, which keeps region means exactly consistent with the
    token-level values. ``bilinear`` interpolates between patch centers
    (clamped at the border) and is only for smoother visualization.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim != 1 or attention.shape[0] != grid.num_patches:
        raise ShapeError(
            f"attention length {attention.shape} does not match {grid.num_patches} patches")
    if mode not in PIXEL_MAP_MODES:
        raise RangeError(f"pixel map mode must be one of {PIXEL_MAP_MODES}")
    cells = attention.reshape(grid.rows, grid.cols)
    if mode == "constant":
        values = np.repeat(np.repeat(cells, _row_spans(grid), axis=0),
                           _col_spans(grid), axis=1)
    else:
        col_centers = np.array(
            [patch_center_for(grid, 0, c)[0] for c in range(grid.cols)])
        row_centers = np.array(
            [patch_center_for(grid, r, 0)[1] for r in range(grid.rows)])
        px = np.arange(grid.image_w) + 0.5
        py = np.arange(grid.image_h) + 0.5
        xi0, xi1, xw = _interp_axis(col_centers, px)
        yi0, yi1, yw = _interp_axis(row_centers, py)
        across = cells[:, xi0] * (1.0 - xw) + cells[:, xi1] * xw
        values = (across[yi0, :] * (1.0 - yw)[:, None]
                  + across[yi1, :] * yw[:, None])
    return PixelAttentionMap(width=grid.image_w, height=grid.image_h, values=values)


def patch_center_for(grid: GridSpec, row: int, col: int) -> tuple[float, float]:
    """Center of the clipped rect at a grid position."""
    return patch_center(row * grid.cols + col, grid)


def region_mean_attention(pmap: PixelAttentionMap, mask: RegionMask) -> float:
    """Mean pixel attention over a hint's region."""
    if (pmap.width, pmap.height) != (mask.width, mask.height):
        raise ShapeError("attention map and mask cover different images")
    ys, xs = mask.index_arrays()
    return float(pmap.values[ys, xs].mean())


# ---------------------------------------------------------------------------
# assembled hint
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtomicHint:
    """One candidate hint: geometry, its region, and its scores."""

    kind: str
    vertices: tuple[tuple[int, int], ...]
    mask: RegionMask
    mean_attention: float
    consistency: float | None = None
    quality: str | None = None


def selection_rects(indices, grid: GridSpec) -> list[Rect]:
    return [token_index_to_patch_rect(i, grid) for i in indices]
