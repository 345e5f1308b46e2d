"""Independent reference implementations used to cross-check the engine.

Everything here is written from the operation definitions alone, using
different algorithms than the package where possible: explicit loops with
compensated sums, library eigendecomposition, exact rational barycentric
tests, and segment clipping instead of distance minimization.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def dot_oracle(thinking, assistant) -> np.ndarray:
    thinking = np.asarray(thinking, dtype=np.float64)
    assistant = np.asarray(assistant, dtype=np.float64)
    out = np.zeros((thinking.shape[0], assistant.shape[0]))
    for i in range(thinking.shape[0]):
        for j in range(assistant.shape[0]):
            out[i, j] = math.fsum(
                float(thinking[i, d]) * float(assistant[j, d])
                for d in range(thinking.shape[1]))
    return out


def col_mean_oracle(per_token) -> np.ndarray:
    per_token = np.asarray(per_token, dtype=np.float64)
    rows = per_token.shape[0]
    return np.array([
        math.fsum(float(per_token[i, j]) for i in range(rows)) / rows
        for j in range(per_token.shape[1])
    ])


def topk_oracle(mean, k) -> list[int]:
    mean = list(map(float, mean))
    order = sorted(range(len(mean)), key=lambda j: (-mean[j], j))
    return order[:k]


def line_oracle(centers):
    """Endpoints by exhaustive extreme projection onto the library eigenvector.

    Returns (low, high, direction) where direction is the unit principal
    axis from numpy's symmetric eigensolver with the same sign convention.
    """
    pts = np.asarray(centers, dtype=np.float64)
    dev = pts - pts.mean(axis=0)
    cov = dev.T @ dev / pts.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    direction = eigvecs[:, int(np.argmax(eigvals))]
    if direction[0] < 0 or (direction[0] == 0 and direction[1] < 0):
        direction = -direction
    projections = pts @ direction
    lo = min(range(len(projections)), key=lambda i: (projections[i], i))
    hi = max(range(len(projections)), key=lambda i: (projections[i], -i))
    return tuple(pts[lo]), tuple(pts[hi]), direction


def triangle_oracle(rects):
    """Max-area corner triangle by brute force with explicit tie collection."""
    corners = set()
    for x0, y0, x1, y1 in rects:
        corners.update(((x0, y0), (x1, y0), (x0, y1), (x1, y1)))
    best_area = 0
    winners = []
    for tri in itertools.combinations(sorted(corners), 3):
        (ax, ay), (bx, by), (cx, cy) = tri
        area2 = abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
        if area2 > best_area:
            best_area = area2
            winners = [tri]
        elif area2 == best_area and area2 > 0:
            winners.append(tri)
    if not winners:
        return None
    vertices = min(tuple(sorted(t)) for t in winners)
    # counterclockwise = positive shoelace; try every order starting at the
    # smallest vertex and keep the one that satisfies it
    start = min(vertices)
    rest = [v for v in vertices if v != start]
    for order in (
        (start, rest[0], rest[1]),
        (start, rest[1], rest[0]),
    ):
        (ax, ay), (bx, by), (cx, cy) = order
        if (bx - ax) * (cy - ay) - (cx - ax) * (by - ay) > 0:
            return order
    raise AssertionError("no counterclockwise order found")


def box_oracle(rects):
    arr = np.asarray(rects, dtype=np.int64)
    return ((int(arr[:, 0].min()), int(arr[:, 1].min())),
            (int(arr[:, 2].max()), int(arr[:, 3].max())))


def point_in_triangle_oracle(px: Fraction, py: Fraction, tri) -> bool:
    """Exact rational barycentric membership, boundary inclusive."""
    (ax, ay), (bx, by), (cx, cy) = [(Fraction(x), Fraction(y)) for x, y in tri]
    det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
    if det == 0:
        return False
    s = ((px - ax) * (cy - ay) - (cx - ax) * (py - ay)) / det
    t = ((bx - ax) * (py - ay) - (px - ax) * (by - ay)) / det
    return s >= 0 and t >= 0 and s + t <= 1


def segment_intersects_square(center, radius: Fraction, p1, p2) -> bool:
    """Exact Liang-Barsky test of a segment against an axis-aligned square.

    A point lies within Chebyshev distance r of a segment exactly when the
    segment meets the square of half-size r centered on the point, which
    gives an independent formulation of the thick-line rasterization rule.
    """
    cx, cy = Fraction(center[0]), Fraction(center[1])
    x1, y1 = Fraction(p1[0]), Fraction(p1[1])
    x2, y2 = Fraction(p2[0]), Fraction(p2[1])
    dx, dy = x2 - x1, y2 - y1
    t_lo, t_hi = Fraction(0), Fraction(1)
    for delta, low, high in ((dx, cx - radius - x1, cx + radius - x1),
                             (dy, cy - radius - y1, cy + radius - y1)):
        if delta == 0:
            if low > 0 or high < 0:
                return False
            continue
        t_a, t_b = low / delta, high / delta
        if t_a > t_b:
            t_a, t_b = t_b, t_a
        t_lo = max(t_lo, t_a)
        t_hi = min(t_hi, t_b)
        if t_lo > t_hi:
            return False
    return True


def pearson_oracle(u, v) -> float:
    u = list(map(float, u))
    v = list(map(float, v))
    n = len(u)
    mu = math.fsum(u) / n
    mv = math.fsum(v) / n
    num = math.fsum((a - mu) * (b - mv) for a, b in zip(u, v))
    du = math.fsum((a - mu) ** 2 for a in u)
    dv = math.fsum((b - mv) ** 2 for b in v)
    if du == 0.0 or dv == 0.0:
        return 0.0
    return num / (math.sqrt(du) * math.sqrt(dv))


def normalized_region_oracle(pmap_values, mask_pixels, eps) -> list[float]:
    raw = [float(pmap_values[y, x]) for x, y in mask_pixels]
    total = math.fsum(raw) + eps
    return [value / total for value in raw]


def consistency_oracle(map_values_list, mask_pixels, eps) -> float:
    vectors = [normalized_region_oracle(values, mask_pixels, eps)
               for values in map_values_list]
    total = 0.0
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            rho = pearson_oracle(vectors[i], vectors[j])
            total += min(1.0, max(-1.0, rho))
    return total


def region_mean_oracle(pmap_values, mask_pixels) -> float:
    return math.fsum(float(pmap_values[y, x]) for x, y in mask_pixels) / len(mask_pixels)
