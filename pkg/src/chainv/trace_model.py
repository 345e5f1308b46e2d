"""Attention-trace data model, patch-grid geometry, and the line wire format.

A trace stream is a text file with one record per line. The first line is a
header ``{"format_version":1}``; every following line is one record in
canonical form: fixed key order, tensors as ``{"shape":[...],"data":[...]}``
flat arrays, and every real number printed with 9 significant digits. Because
serialization is canonical, ``serialize(parse(line)) == line`` byte for byte
for any line this module wrote.

Geometry convention: the visual-assistant image is split into a row-major
grid of patches with the origin at the top-left pixel. Token index ``i`` maps
to grid cell ``(i // cols, i % cols)``; cells in the last row or column are
clipped to the image instead of padded, so the patch rects always tile the
image exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, SchemaError

FORMAT_VERSION = 1

GRID_ORDER = "row-major"
GRID_ORIGIN = "top-left"

TRACE_MODES = ("embeddings", "attention")
HINT_KINDS = ("line", "triangle", "box")
QUALITY_LABELS = ("high", "medium", "low")

VERTEX_COUNTS = {"line": 2, "triangle": 3, "box": 2}

# ---------------------------------------------------------------------------
# canonical scalar formatting
# ---------------------------------------------------------------------------


def format_real(value: float) -> str:
    """Canonical text form of a real number: 9 significant digits.

    Nine digits round-trip any 32-bit real exactly and give byte-stable
    output: re-serializing a parsed canonical value reproduces the text.
    """
    return format(float(value), ".9g")


def dumps_canonical(value) -> str:
    """Serialize to JSON with deterministic key order and float formatting.

    Dicts are emitted in insertion order, so builders define the canonical
    field order simply by constructing dicts in it.
    """
    if isinstance(value, dict):
        parts = (f"{json.dumps(k)}:{dumps_canonical(v)}" for k, v in value.items())
        return "{" + ",".join(parts) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(dumps_canonical(v) for v in value) + "]"
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def loads_object(line: str) -> dict:
    try:
        value = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, offset=exc.pos) from exc
    if not isinstance(value, dict):
        raise SchemaError("record", "top level must be an object")
    return value


def _check_keys(obj: dict, allowed: Sequence[str], context: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(key, f"unknown field in {context}")


def _require(obj: dict, key: str):
    if key not in obj:
        raise SchemaError(key, "missing field")
    return obj[key]


def require_int(value, field: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(field, "expected an integer")
    if minimum is not None and value < minimum:
        raise SchemaError(field, f"must be >= {minimum}")
    return value


def require_real(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(field, "expected a real number")
    out = float(value)
    if not math.isfinite(out):
        raise SchemaError(field, "must be finite")
    return out


def require_str(value, field: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(field, "expected a string")
    return value


# ---------------------------------------------------------------------------
# grid geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Patch layout of the visual-assistant image.

    ``rows * cols`` must equal the visual token count, and the grid must
    cover the image: the last row and column may be clipped by the image
    border but may not start outside it, and no pixel may be left uncovered.
    """

    rows: int
    cols: int
    patch_w: int
    patch_h: int
    image_w: int
    image_h: int
    order: str = GRID_ORDER
    origin: str = GRID_ORIGIN

    def __post_init__(self):
        for name in ("rows", "cols", "patch_w", "patch_h", "image_w", "image_h"):
            require_int(getattr(self, name), name, minimum=1)
        if self.order != GRID_ORDER:
            raise SchemaError("order", f"must be '{GRID_ORDER}'")
        if self.origin != GRID_ORIGIN:
            raise SchemaError("origin", f"must be '{GRID_ORIGIN}'")
        if (self.rows - 1) * self.patch_h >= self.image_h:
            raise SchemaError("rows", "last patch row starts outside the image")
        if self.rows * self.patch_h < self.image_h:
            raise SchemaError("rows", "patch rows do not cover the image")
        if (self.cols - 1) * self.patch_w >= self.image_w:
            raise SchemaError("cols", "last patch column starts outside the image")
        if self.cols * self.patch_w < self.image_w:
            raise SchemaError("cols", "patch columns do not cover the image")

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    def to_wire(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "patch_w": self.patch_w,
            "patch_h": self.patch_h,
            "image_w": self.image_w,
            "image_h": self.image_h,
            "order": self.order,
            "origin": self.origin,
        }

    @classmethod
    def from_wire(cls, obj) -> "GridSpec":
        if not isinstance(obj, dict):
            raise SchemaError("grid", "expected an object")
        fields = ("rows", "cols", "patch_w", "patch_h", "image_w", "image_h", "order", "origin")
        _check_keys(obj, fields, "grid")
        for name in fields:
            _require(obj, name)
        return cls(
            rows=require_int(obj["rows"], "rows"),
            cols=require_int(obj["cols"], "cols"),
            patch_w=require_int(obj["patch_w"], "patch_w"),
            patch_h=require_int(obj["patch_h"], "patch_h"),
            image_w=require_int(obj["image_w"], "image_w"),
            image_h=require_int(obj["image_h"], "image_h"),
            order=require_str(obj["order"], "order"),
            origin=require_str(obj["origin"], "origin"),
        )


def token_index_to_patch_rect(idx: int, grid: GridSpec) -> tuple[int, int, int, int]:
    """Half-open pixel rect ``(x0, y0, x1, y1)`` covered by visual token ``idx``.

    Rects in the last row or column are clipped to the image border.
    """
    if not 0 <= idx < grid.num_patches:
        raise IndexError(f"token index {idx} out of range for {grid.num_patches} patches")
    row, col = divmod(idx, grid.cols)
    x0 = col * grid.patch_w
    y0 = row * grid.patch_h
    x1 = min(x0 + grid.patch_w, grid.image_w)
    y1 = min(y0 + grid.patch_h, grid.image_h)
    return (x0, y0, x1, y1)


def patch_center(idx: int, grid: GridSpec) -> tuple[float, float]:
    """Midpoint of the clipped patch rect, in pixel coordinates."""
    x0, y0, x1, y1 = token_index_to_patch_rect(idx, grid)
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


# ---------------------------------------------------------------------------
# trace records
# ---------------------------------------------------------------------------


def _freeze_tensor(value, field: str, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise SchemaError(field, f"expected a rank-{ndim} tensor")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(field, "all values must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """One captured reasoning step of one session.

    ``mode`` selects the payload: ``embeddings`` carries the visual-assistant
    token embeddings together with the recent thinking-token embeddings, and
    the engine computes attention itself; ``attention`` carries a precomputed
    thinking-by-patch attention matrix verbatim.
    """

    session_id: str
    step: int
    grid: GridSpec
    mode: str
    assistant_embeddings: np.ndarray | None = None
    thinking_embeddings: np.ndarray | None = None
    attention: np.ndarray | None = None

    def __post_init__(self):
        require_str(self.session_id, "session_id")
        require_int(self.step, "step", minimum=0)
        if not isinstance(self.grid, GridSpec):
            raise SchemaError("grid", "expected a GridSpec")
        if self.mode not in TRACE_MODES:
            raise SchemaError("mode", f"must be one of {TRACE_MODES}")
        if self.mode == "embeddings":
            if self.assistant_embeddings is None:
                raise SchemaError("assistant_embeddings", "missing field")
            if self.thinking_embeddings is None:
                raise SchemaError("thinking_embeddings", "missing field")
            if self.attention is not None:
                raise SchemaError("attention", "not allowed in embeddings mode")
            assistant = _freeze_tensor(self.assistant_embeddings, "assistant_embeddings", 2)
            thinking = _freeze_tensor(self.thinking_embeddings, "thinking_embeddings", 2)
            if assistant.shape[0] != self.grid.num_patches:
                raise SchemaError("assistant_embeddings", "row count must equal rows*cols")
            if assistant.shape[1] < 1:
                raise SchemaError("assistant_embeddings", "embedding width must be >= 1")
            if thinking.shape[0] < 2:
                raise SchemaError("thinking_embeddings", "need at least 2 thinking tokens")
            if thinking.shape[1] != assistant.shape[1]:
                raise SchemaError("thinking_embeddings", "embedding widths must agree")
            object.__setattr__(self, "assistant_embeddings", assistant)
            object.__setattr__(self, "thinking_embeddings", thinking)
        else:
            if self.attention is None:
                raise SchemaError("attention", "missing field")
            if self.assistant_embeddings is not None:
                raise SchemaError("assistant_embeddings", "not allowed in attention mode")
            if self.thinking_embeddings is not None:
                raise SchemaError("thinking_embeddings", "not allowed in attention mode")
            attention = _freeze_tensor(self.attention, "attention", 2)
            if attention.shape[0] < 2:
                raise SchemaError("attention", "need at least 2 thinking tokens")
            if attention.shape[1] != self.grid.num_patches:
                raise SchemaError("attention", "column count must equal rows*cols")
            object.__setattr__(self, "attention", attention)

    @property
    def num_thinking_tokens(self) -> int:
        source = self.thinking_embeddings if self.mode == "embeddings" else self.attention
        return int(source.shape[0])

    @property
    def num_patches(self) -> int:
        return self.grid.num_patches


def _tensor_to_wire(arr: np.ndarray) -> dict:
    return {"shape": [int(d) for d in arr.shape], "data": [float(v) for v in arr.ravel()]}


def _tensor_from_wire(obj, field: str) -> np.ndarray:
    if not isinstance(obj, dict):
        raise SchemaError(field, "expected an object with shape and data")
    _check_keys(obj, ("shape", "data"), field)
    shape = _require(obj, "shape")
    data = _require(obj, "data")
    if not isinstance(shape, list) or len(shape) != 2:
        raise SchemaError(f"{field}.shape", "expected [rows, cols]")
    dims = [require_int(d, f"{field}.shape", minimum=1) for d in shape]
    if not isinstance(data, list):
        raise SchemaError(f"{field}.data", "expected an array")
    if len(data) != dims[0] * dims[1]:
        raise SchemaError(f"{field}.data", "length must equal product of shape")
    values = [require_real(v, f"{field}.data") for v in data]
    return np.array(values, dtype=np.float64).reshape(dims)


def serialize_trace_record(record: TraceRecord) -> str:
    obj = {
        "session_id": record.session_id,
        "step": record.step,
        "grid": record.grid.to_wire(),
        "mode": record.mode,
    }
    if record.mode == "embeddings":
        obj["assistant_embeddings"] = _tensor_to_wire(record.assistant_embeddings)
        obj["thinking_embeddings"] = _tensor_to_wire(record.thinking_embeddings)
    else:
        obj["attention"] = _tensor_to_wire(record.attention)
    return dumps_canonical(obj)


def parse_trace_record(line: str) -> TraceRecord:
    obj = loads_object(line)
    allowed = ("session_id", "step", "grid", "mode",
               "assistant_embeddings", "thinking_embeddings", "attention")
    _check_keys(obj, allowed, "trace record")
    mode = require_str(_require(obj, "mode"), "mode")
    if mode not in TRACE_MODES:
        raise SchemaError("mode", f"must be one of {TRACE_MODES}")
    grid = GridSpec.from_wire(_require(obj, "grid"))
    kwargs = {}
    if mode == "embeddings":
        kwargs["assistant_embeddings"] = _tensor_from_wire(
            _require(obj, "assistant_embeddings"), "assistant_embeddings")
        kwargs["thinking_embeddings"] = _tensor_from_wire(
            _require(obj, "thinking_embeddings"), "thinking_embeddings")
    else:
        kwargs["attention"] = _tensor_from_wire(_require(obj, "attention"), "attention")
    return TraceRecord(
        session_id=require_str(_require(obj, "session_id"), "session_id"),
        step=require_int(_require(obj, "step"), "step", minimum=0),
        grid=grid,
        mode=mode,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# hint records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HintRecord:
    """One rendered visual hint tied to a session step.

    Vertices are integer pixel coordinates: two endpoints for a line, three
    counterclockwise corners for a triangle, and min/max corners for a box
    (the max corner is the exclusive bound of the covered pixel rect, so it
    may lie on the image border).
    """

    session_id: str
    step: int
    hint_kind: str
    vertices: tuple[tuple[int, int], ...]
    mean_attention: float
    consistency: float
    quality: str
    rendered_text: str

    def __post_init__(self):
        require_str(self.session_id, "session_id")
        require_int(self.step, "step", minimum=0)
        if self.hint_kind not in HINT_KINDS:
            raise SchemaError("hint_kind", f"must be one of {HINT_KINDS}")
        vertices = tuple(
            (require_int(x, "vertices"), require_int(y, "vertices")) for x, y in self.vertices
        )
        if len(vertices) != VERTEX_COUNTS[self.hint_kind]:
            raise SchemaError(
                "vertices",
                f"{self.hint_kind} needs {VERTEX_COUNTS[self.hint_kind]} vertices")
        if self.hint_kind == "box":
            (x0, y0), (x1, y1) = vertices
            if not (x0 < x1 and y0 < y1):
                raise SchemaError("vertices", "box corners must be (min, max) and distinct")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "mean_attention", require_real(self.mean_attention, "mean_attention"))
        object.__setattr__(self, "consistency", require_real(self.consistency, "consistency"))
        if self.quality not in QUALITY_LABELS:
            raise SchemaError("quality", f"must be one of {QUALITY_LABELS}")
        require_str(self.rendered_text, "rendered_text")

    def validate_in_bounds(self, image_w: int, image_h: int) -> None:
        """Check every vertex against the image's coordinate range.

        Corner coordinates live on the closed grid ``[0, w] x [0, h]``; the
        exclusive bound of an edge-touching patch rect sits exactly on the
        border, so the upper bound is inclusive here.
        """
        for x, y in self.vertices:
            if not (0 <= x <= image_w and 0 <= y <= image_h):
                raise SchemaError("vertices", f"vertex ({x},{y}) outside image bounds")


def hint_record_to_obj(record: HintRecord) -> dict:
    return {
        "session_id": record.session_id,
        "step": record.step,
        "hint_kind": record.hint_kind,
        "vertices": [[x, y] for x, y in record.vertices],
        "mean_attention": record.mean_attention,
        "consistency": record.consistency,
        "quality": record.quality,
        "rendered_text": record.rendered_text,
    }


def hint_record_from_obj(obj) -> HintRecord:
    if not isinstance(obj, dict):
        raise SchemaError("hint", "expected an object")
    fields = ("session_id", "step", "hint_kind", "vertices",
              "mean_attention", "consistency", "quality", "rendered_text")
    _check_keys(obj, fields, "hint record")
    for name in fields:
        _require(obj, name)
    raw_vertices = obj["vertices"]
    if not isinstance(raw_vertices, list) or not all(
            isinstance(v, list) and len(v) == 2 for v in raw_vertices):
        raise SchemaError("vertices", "expected a list of [x, y] pairs")
    return HintRecord(
        session_id=require_str(obj["session_id"], "session_id"),
        step=require_int(obj["step"], "step", minimum=0),
        hint_kind=require_str(obj["hint_kind"], "hint_kind"),
        vertices=tuple((require_int(v[0], "vertices"), require_int(v[1], "vertices"))
                       for v in raw_vertices),
        mean_attention=require_real(obj["mean_attention"], "mean_attention"),
        consistency=require_real(obj["consistency"], "consistency"),
        quality=require_str(obj["quality"], "quality"),
        rendered_text=require_str(obj["rendered_text"], "rendered_text"),
    )


def serialize_hint_record(record: HintRecord) -> str:
    return dumps_canonical(hint_record_to_obj(record))


def parse_hint_record(line: str) -> HintRecord:
    return hint_record_from_obj(loads_object(line))


# ---------------------------------------------------------------------------
# stream files
# ---------------------------------------------------------------------------


def serialize_header() -> str:
    return dumps_canonical({"format_version": FORMAT_VERSION})


def parse_header(line: str) -> None:
    obj = loads_object(line)
    _check_keys(obj, ("format_version",), "header")
    version = require_int(_require(obj, "format_version"), "format_version")
    if version != FORMAT_VERSION:
        raise SchemaError("format_version", f"unsupported version {version}")


def read_record_stream(path, parse_record) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty stream: missing header line")
    for lineno, line in enumerate(lines, start=1):
        try:
            if lineno == 1:
                parse_header(line)
            else:
                records.append(parse_record(line))
        except (ParseError, SchemaError) as exc:
            exc.line_no = lineno
            raise
    return records


def write_record_stream(path, records, serialize_record) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_header() + "\n")
        for record in records:
            handle.write(serialize_record(record) + "\n")


def read_trace_records(path) -> list[TraceRecord]:
    return read_record_stream(path, parse_trace_record)


def write_trace_records(path, records: Iterable[TraceRecord]) -> None:
    write_record_stream(path, records, serialize_trace_record)


def read_hint_records(path) -> list[HintRecord]:
    return read_record_stream(path, parse_hint_record)


def write_hint_records(path, records: Iterable[HintRecord]) -> None:
    write_record_stream(path, records, serialize_hint_record)


def with_rendered_text(record: HintRecord, text: str) -> HintRecord:
    return replace(record, rendered_text=text)
