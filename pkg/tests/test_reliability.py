"""Consistency scoring, quality labeling, and final-hint selection."""

from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from chainv.atomic_hints import (
    AtomicHint,
    RegionMask,
    pixel_attention_map,
    region_mask,
)
from chainv.errors import (
    DegenerateCorrelation,
    EmptyInputError,
    SchemaError,
    ShapeError,
)
from chainv.reliability import (
    ConsistencyScore,
    consistency_score,
    label_hints,
    normalize_region_attention,
    pearson,
    rank_labels,
    select_final_hint,
)
from chainv.trace_model import GridSpec

from engine_helpers import quantized
from oracles import consistency_oracle, normalized_region_oracle, pearson_oracle

GRID = GridSpec(rows=4, cols=4, patch_w=8, patch_h=8, image_w=32, image_h=32)


def _map(values) -> "pixel_attention_map":
    return pixel_attention_map(np.asarray(values, dtype=np.float64), GRID)


def _random_maps(rng, count, positive=False):
    low, high = (16, 65) if positive else (0, 65)
    return [_map(quantized(rng, GRID.num_patches, low=low, high=high))
            for _ in range(count)]


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def test_normalize_uniform_region():
    pmap = _map(np.ones(16))
    mask = region_mask("box", ((0, 0), (2, 2)), GRID)
    vec = normalize_region_attention(pmap, mask, eps=1e-8)
    assert vec.shape == (4,)
    assert np.all(vec == 1.0 / (4.0 + 1e-8))


def test_normalize_zero_region_has_no_division_error():
    pmap = _map(np.zeros(16))
    mask = region_mask("box", ((0, 0), (4, 4)), GRID)
    vec = normalize_region_attention(pmap, mask, eps=1e-8)
    assert np.all(vec == 0.0)


def test_normalize_matches_direct_formula_oracle():
    rng = np.random.default_rng(67)
    pmap = _map(rng.standard_normal(16))
    mask = region_mask("triangle", ((0, 0), (30, 4), (6, 28)), GRID)
    vec = normalize_region_attention(pmap, mask, eps=1e-8)
    expected = normalized_region_oracle(pmap.values, mask.pixels, 1e-8)
    assert np.allclose(vec, expected, rtol=1e-12, atol=1e-15)


def test_normalize_dimension_mismatch():
    other = GridSpec(rows=2, cols=2, patch_w=8, patch_h=8, image_w=16, image_h=16)
    pmap = pixel_attention_map(np.ones(4), other)
    mask = region_mask("box", ((0, 0), (4, 4)), GRID)
    with pytest.raises(ShapeError):
        normalize_region_attention(pmap, mask, eps=1e-8)


# ---------------------------------------------------------------------------
# pearson
# ---------------------------------------------------------------------------


def test_pearson_self_correlation_is_one():
    u = np.array([1.0, 3.0, 2.0, 5.0])
    assert pearson(u, u) == 1.0


def test_pearson_affine_invariance_signs():
    u = np.array([1.0, 2.0, 4.0, 8.0])
    assert pearson(u, 3.0 * u + 2.0) == 1.0
    assert pearson(u, -0.5 * u + 1.0) == -1.0


def test_pearson_hand_example():
    assert pearson(np.array([1.0, 2.0, 3.0, 4.0]),
                   np.array([2.0, 1.0, 4.0, 3.0])) == 0.6


def test_pearson_constant_vector_pins_to_zero_with_warning():
    with pytest.warns(DegenerateCorrelation):
        assert pearson(np.array([2.0, 2.0, 2.0]), np.array([1.0, 2.0, 3.0])) == 0.0
    with pytest.warns(DegenerateCorrelation):
        assert pearson(np.array([1.0, 2.0, 3.0]), np.array([5.0, 5.0, 5.0])) == 0.0


def test_pearson_shape_errors():
    with pytest.raises(ShapeError):
        pearson(np.ones(3), np.ones(4))
    with pytest.raises(ShapeError):
        pearson(np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(EmptyInputError):
        pearson(np.ones(1), np.ones(1))


def test_pearson_matches_definitional_oracle():
    rng = np.random.default_rng(71)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        assert pearson(u, v) == pytest.approx(pearson_oracle(u, v), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
@settings(max_examples=100)
def test_pearson_bounds_and_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCorrelation)
        rho = pearson(u, v)
        assert -1.0 <= rho <= 1.0
        assert pearson(v, u) == rho


@given(st.integers(0, 2**32 - 1),
       st.floats(0.01, 100.0, allow_nan=False),
       st.floats(-50.0, 50.0, allow_nan=False))
@settings(max_examples=100)
def test_pearson_positive_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(8)
    v = rng.standard_normal(8)
    rho = pearson(u, v)
    assert pearson(u, a * v + b) == pytest.approx(rho, abs=1e-9)
    assert pearson(u, -a * v + b) == pytest.approx(-rho, abs=1e-9)


def test_pearson_clamps_against_rounding():
    # nearly identical vectors can push the ratio a hair above 1
    u = np.array([1.0, 1.0 + 1e-16, 1.0 + 2e-16, 2.0])
    rho = pearson(u, u * (1.0 + 1e-16))
    assert rho <= 1.0


# ---------------------------------------------------------------------------
# consistency
# ---------------------------------------------------------------------------


def test_consistency_identical_maps():
    rng = np.random.default_rng(73)
    base = quantized(rng, GRID.num_patches)
    mask = region_mask("box", ((0, 0), (16, 16)), GRID)
    two = consistency_score([_map(base)] * 2, mask)
    assert two.score == 1.0 and two.pairs == 1
    three = consistency_score([_map(base)] * 3, mask)
    assert three.score == 3.0 and three.pairs == 3


def test_consistency_matches_double_loop_oracle():
    rng = np.random.default_rng(79)
    maps = _random_maps(rng, 4)
    mask = region_mask("triangle", ((0, 0), (28, 8), (4, 30)), GRID)
    score = consistency_score(maps, mask, eps=1e-8)
    expected = consistency_oracle([m.values for m in maps], mask.pixels, 1e-8)
    assert score.score == pytest.approx(expected, abs=1e-10)
    assert score.pairs == 6


def test_consistency_requires_two_tokens():
    mask = region_mask("box", ((0, 0), (8, 8)), GRID)
    with pytest.raises(EmptyInputError):
        consistency_score([_map(np.ones(16))], mask)


def test_consistency_is_order_invariant():
    rng = np.random.default_rng(83)
    maps = _random_maps(rng, 4)
    mask = region_mask("box", ((4, 4), (20, 24)), GRID)
    base = consistency_score(maps, mask).score
    shuffled = [maps[2], maps[0], maps[3], maps[1]]
    assert consistency_score(shuffled, mask).score == pytest.approx(base, abs=1e-12)


def test_consistency_normalization_invariance_on_positive_fixtures():
    # normalization is a positive per-token scaling, so raw and normalized
    # region vectors must correlate identically up to the eps perturbation
    rng = np.random.default_rng(89)
    mask = region_mask("box", ((0, 0), (16, 16)), GRID)
    ys, xs = mask.index_arrays()
    for _ in range(20):
        maps = _random_maps(rng, 4, positive=True)
        assert all(float(m.values[ys, xs].sum()) >= 1.0 for m in maps)
        normalized = consistency_score(maps, mask, eps=1e-8).score
        raw = 0.0
        vectors = [m.values[ys, xs] for m in maps]
        for i in range(4):
            for j in range(i + 1, 4):
                raw += pearson(vectors[i], vectors[j])
        assert normalized == pytest.approx(raw, abs=1e-10)


def test_consistency_score_bound_validation():
    with pytest.raises(SchemaError):
        ConsistencyScore(score=2.5, pairs=1)
    with pytest.raises(SchemaError):
        ConsistencyScore(score=float("inf"), pairs=3)
    with pytest.raises(SchemaError):
        ConsistencyScore(score=0.0, pairs=0)
    assert ConsistencyScore(score=-3.0, pairs=3).score == -3.0


# ---------------------------------------------------------------------------
# labels and final selection
# ---------------------------------------------------------------------------


def test_rank_labels_strict_order():
    labels = rank_labels([
        ConsistencyScore(score=2.0, pairs=6, kind="line"),
        ConsistencyScore(score=1.0, pairs=6, kind="triangle"),
        ConsistencyScore(score=0.5, pairs=6, kind="box"),
    ])
    assert labels == {"line": "high", "triangle": "medium", "box": "low"}


def test_rank_labels_tie_break_prefers_box():
    labels = rank_labels([
        ConsistencyScore(score=1.0, pairs=3, kind=k)
        for k in ("line", "triangle", "box")
    ])
    assert labels == {"box": "high", "triangle": "medium", "line": "low"}


def test_rank_labels_matches_sort_oracle():
    rng = np.random.default_rng(97)
    priority = {"box": 0, "triangle": 1, "line": 2}
    for _ in range(200):
        scores = [ConsistencyScore(score=float(rng.choice([-1.0, 0.0, 0.5, 1.0])),
                                   pairs=1, kind=k)
                  for k in ("line", "triangle", "box")]
        labels = rank_labels(scores)
        order = sorted(scores, key=lambda s: (-s.score, priority[s.kind]))
        assert [labels[s.kind] for s in order] == ["high", "medium", "low"]
        assert sorted(labels.values()) == ["high", "low", "medium"]


def test_rank_labels_requires_all_three_kinds():
    with pytest.raises(SchemaError):
        rank_labels([ConsistencyScore(score=1.0, pairs=1, kind="line")] * 3)
    with pytest.raises(SchemaError):
        rank_labels([ConsistencyScore(score=1.0, pairs=1, kind="line"),
                     ConsistencyScore(score=1.0, pairs=1, kind="box")])


def _hint(kind: str, mean: float) -> AtomicHint:
    return AtomicHint(kind=kind, vertices=((0, 0), (1, 1)),
                      mask=RegionMask(width=4, height=4, pixels=((0, 0),)),
                      mean_attention=mean)


def test_select_final_hint_uses_attention_not_labels():
    hints = [
        AtomicHint(kind="line", vertices=((0, 0), (1, 1)),
                   mask=RegionMask(width=4, height=4, pixels=((0, 0),)),
                   mean_attention=0.9, consistency=0.1, quality="low"),
        AtomicHint(kind="triangle", vertices=((0, 0), (1, 0), (0, 1)),
                   mask=RegionMask(width=4, height=4, pixels=((0, 0),)),
                   mean_attention=0.5, consistency=2.0, quality="high"),
        AtomicHint(kind="box", vertices=((0, 0), (1, 1)),
                   mask=RegionMask(width=4, height=4, pixels=((0, 0),)),
                   mean_attention=0.4, consistency=1.0, quality="medium"),
    ]
    winner = select_final_hint(hints)
    assert winner.kind == "line"
    assert winner.quality == "low"


def test_select_final_hint_tie_breaks_to_box():
    hints = [_hint("line", 0.5), _hint("triangle", 0.5), _hint("box", 0.5)]
    assert select_final_hint(hints).kind == "box"
    with pytest.raises(EmptyInputError):
        select_final_hint([])


def test_select_final_hint_matches_argmax_oracle():
    rng = np.random.default_rng(101)
    priority = {"box": 0, "triangle": 1, "line": 2}
    for _ in range(200):
        hints = [_hint(k, float(rng.choice([0.1, 0.2, 0.3])))
                 for k in ("line", "triangle", "box")]
        winner = select_final_hint(hints)
        expected = sorted(hints, key=lambda h: (-h.mean_attention,
                                                priority[h.kind]))[0]
        assert winner is expected


def test_label_hints_attaches_scores_and_labels():
    rng = np.random.default_rng(103)
    hints = []
    for kind, vertices in (("line", ((4, 4), (28, 28))),
                           ("triangle", ((0, 0), (32, 0), (0, 32))),
                           ("box", ((0, 0), (32, 32)))):
        mask = region_mask(kind, vertices, GRID, line_thickness=3)
        hints.append(AtomicHint(kind=kind, vertices=vertices, mask=mask,
                                mean_attention=1.0))
    maps = _random_maps(rng, 3, positive=True)
    labeled = label_hints(hints, maps, eps=1e-8)
    assert [h.kind for h in labeled] == ["line", "triangle", "box"]
    assert sorted(h.quality for h in labeled) == ["high", "low", "medium"]
    for hint in labeled:
        expected = consistency_score(maps, hint.mask, eps=1e-8).score
        assert hint.consistency == pytest.approx(expected, abs=1e-12)


@given(hnp.arrays(np.float64, st.integers(2, 12),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
@settings(max_examples=150)
def test_pearson_bounded_for_arbitrary_vectors(u):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCorrelation)
        rho = pearson(u, u[::-1].copy())
    assert -1.0 <= rho <= 1.0
