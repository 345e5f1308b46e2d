"""Reliability scoring: how consistently the thinking tokens agree on a region.

Each hint region gets one normalized attention vector per thinking token;
the region's consistency is the sum of Pearson correlations over all token
pairs. Hints are labeled high/medium/low by that score, while the final
emitted hint is chosen independently by mean region attention.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateCorrelation, EmptyInputError, SchemaError, ShapeError
from .atomic_hints import AtomicHint, PixelAttentionMap, RegionMask
from .trace_model import HINT_KINDS, QUALITY_LABELS

DEFAULT_EPS = 1e-8

# ties in both labeling and final selection prefer the coarser region
KIND_PRIORITY = {"box": 0, "triangle": 1, "line": 2}


@dataclass(frozen=True)
class ConsistencyScore:
    """Pairwise-correlation sum for one hint region."""

    score: float
    pairs: int
    kind: str | None = None

    def __post_init__(self):
        if self.pairs < 1:
            raise SchemaError("pairs", "must be >= 1")
        if not math.isfinite(self.score):
            raise SchemaError("score", "must be finite")
        # each pair contributes a correlation in [-1, 1]
        if abs(self.score) > self.pairs + 1e-9:
            raise SchemaError("score", "exceeds the pair-count bound")


def normalize_region_attention(token_map: PixelAttentionMap, mask: RegionMask,
                               eps: float = DEFAULT_EPS) -> np.ndarray:
    """Attention over the mask pixels scaled by the region total plus eps.

    Output follows the mask's row-major pixel order. ``eps`` only guards the
    division; it is added once to the region sum, not per pixel.
    """
    if (token_map.width, token_map.height) != (mask.width, mask.height):
        raise ShapeError("attention map and mask cover different images")
    ys, xs = mask.index_arrays()
    region = token_map.values[ys, xs]
    return region / (region.sum() + eps)


def pearson(u: np.ndarray, v: np.ndarray) -> float:
    """Two-pass Pearson correlation, clamped to [-1, 1].

    A constant input has no direction to correlate; the result is pinned to
    0 and a :class:`DegenerateCorrelation` warning is emitted.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1:
        raise ShapeError("pearson expects 1-d vectors")
    if u.shape[0] != v.shape[0]:
        raise ShapeError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    if u.shape[0] < 2:
        raise EmptyInputError("pearson needs at least 2 elements")
    du = u - u.mean()
    dv = v - v.mean()
    uu = float(du @ du)
    vv = float(dv @ dv)
    if uu == 0.0 or vv == 0.0:
        warnings.warn("constant vector in correlation", DegenerateCorrelation,
                      stacklevel=2)
        return 0.0
    denom = math.sqrt(uu * vv)
    if not 0.0 < denom < math.inf:
        # uu * vv can underflow to 0.0 or overflow even though both sums
        # are positive finite floats; split the roots in that regime
        denom = math.sqrt(uu) * math.sqrt(vv)
    rho = float(du @ dv) / denom
    return min(1.0, max(-1.0, rho))


def consistency_score(token_maps, mask: RegionMask, eps: float = DEFAULT_EPS,
                      kind: str | None = None) -> ConsistencyScore:
    """Sum of pairwise correlations between the tokens' region vectors."""
    token_maps = list(token_maps)
    if len(token_maps) < 2:
        raise EmptyInputError("consistency needs at least 2 thinking tokens")
    vectors = [normalize_region_attention(m, mask, eps) for m in token_maps]
    total = 0.0
    count = 0
    for i, j in itertools.combinations(range(len(vectors)), 2):
        total += pearson(vectors[i], vectors[j])
        count += 1
    return ConsistencyScore(score=total, pairs=count, kind=kind)


def rank_labels(scores) -> dict[str, str]:
    """Map the three hint kinds to high/medium/low by descending score.

    Equal scores fall back to region coarseness: box, then triangle, then
    line.
    """
    scores = list(scores)
    kinds = sorted(s.kind for s in scores)
    if len(scores) != 3 or kinds != sorted(HINT_KINDS):
        raise SchemaError("scores", "need exactly one score per hint kind")
    ordered = sorted(scores, key=lambda s: (-s.score, KIND_PRIORITY[s.kind]))
    return {s.kind: label for s, label in zip(ordered, QUALITY_LABELS)}


def label_hints(hints, token_maps, eps: float = DEFAULT_EPS) -> list[AtomicHint]:
    """Score and label a full set of candidate hints."""
    hints = list(hints)
    scores = [consistency_score(token_maps, h.mask, eps, kind=h.kind) for h in hints]
    labels = rank_labels(scores)
    return [
        replace(h, consistency=s.score, quality=labels[h.kind])
        for h, s in zip(hints, scores)
    ]


def select_final_hint(hints) -> AtomicHint:
    """The hint with the highest mean region attention.

    Selection ignores the consistency ranking entirely; the quality label
    the winner carries is the one assigned by :func:`rank_labels`.
    """
    hints = list(hints)
    if not hints:
        raise EmptyInputError("no hints to select from")
    return min(hints, key=lambda h: (-h.mean_attention, KIND_PRIORITY[h.kind]))
