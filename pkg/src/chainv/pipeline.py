"""Per-record hint construction: selection, geometry, scoring, rendering.

This is the composition layer the CLI and the harness share. Given one
trace record it selects the salient patches, builds the candidate hints,
scores and labels them, picks the winner by mean region attention, and
renders the insertion sentence.
"""

from __future__ import annotations

from . import atomic_hints, patch_selection, reliability, scheduler
from .config import EngineConfig
from .trace_model import HintRecord, TraceRecord, patch_center, with_rendered_text


def candidate_hints(record: TraceRecord, cfg: EngineConfig) -> list[atomic_hints.AtomicHint]:
    """The scored, labeled candidate hints for one trace record.

    With atomic hints disabled only the coarse box over the selected patch
    rects is produced, and reliability labeling is skipped (it needs the
    full candidate set); the placeholder quality is ``medium``.
    """
    profile = patch_selection.profile_for_record(record)
    selection = patch_selection.top_k_patches(profile.mean, cfg.k)
    grid = record.grid
    rects = atomic_hints.selection_rects(selection.indices, grid)

    geometries: list[tuple[str, tuple[tuple[int, int], ...]]] = []
    if cfg.enable_atomic_hints:
        centers = [patch_center(i, grid) for i in selection.indices]
        low, high = atomic_hints.line_hint(centers)
        line_vertices = (
            (atomic_hints.round_pixel(low[0]), atomic_hints.round_pixel(low[1])),
            (atomic_hints.round_pixel(high[0]), atomic_hints.round_pixel(high[1])),
        )
        geometries.append(("line", line_vertices))
        geometries.append(("triangle", atomic_hints.triangle_hint(rects)))
    geometries.append(("box", atomic_hints.box_hint(rects)))

    mean_map = atomic_hints.pixel_attention_map(profile.mean, grid, cfg.pixel_map_mode)
    hints = []
    for kind, vertices in geometries:
        mask = atomic_hints.region_mask(kind, vertices, grid,
                                        line_thickness=cfg.line_thickness)
        hints.append(atomic_hints.AtomicHint(
            kind=kind,
            vertices=tuple(vertices),
            mask=mask,
            mean_attention=atomic_hints.region_mean_attention(mean_map, mask),
        ))

    if cfg.reliability_active:
        token_maps = [
            atomic_hints.pixel_attention_map(row, grid, cfg.pixel_map_mode)
            for row in profile.per_token
        ]
        hints = reliability.label_hints(hints, token_maps, cfg.eps)
    else:
        hints = [
            atomic_hints.AtomicHint(
                kind=h.kind, vertices=h.vertices, mask=h.mask,
                mean_attention=h.mean_attention, consistency=0.0, quality="medium")
            for h in hints
        ]
    return hints


def _to_record(hint: atomic_hints.AtomicHint, record: TraceRecord,
               cfg: EngineConfig) -> HintRecord:
    rendering = cfg.reliability_rendering if cfg.reliability_active else "none"
    out = HintRecord(
        session_id=record.session_id,
        step=record.step,
        hint_kind=hint.kind,
        vertices=hint.vertices,
        mean_attention=hint.mean_attention,
        consistency=hint.consistency,
        quality=hint.quality,
        rendered_text="",
    )
    out.validate_in_bounds(record.grid.image_w, record.grid.image_h)
    return with_rendered_text(out, scheduler.render_hint_text(out, cfg.scheduler, rendering))


def hint_records(record: TraceRecord, cfg: EngineConfig,
                 all_hints: bool = False) -> list[HintRecord]:
    """Hint records for one trace record: the winner, or every candidate."""
    hints = candidate_hints(record, cfg)
    if not all_hints:
        hints = [reliability.select_final_hint(hints)]
    return [_to_record(h, record, cfg) for h in hints]


def final_hint(record: TraceRecord, cfg: EngineConfig) -> HintRecord:
    """The single hint the scheduler would inject for this record."""
    return hint_records(record, cfg, all_hints=False)[0]
