"""Writer for the hint engine's trace wire format.

This is an independent implementation of the published stream layout (the
wire format is the interface; the engine's own code is not imported):
JSON lines, a ``{"format_version":1}`` header, fixed key order, no spaces,
reals at 9 significant digits, trailing newline.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import SchemaError

HEADER = '{"format_version":1}'


def format_real(value: float) -> str:
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError("reals on the wire must be finite")
    return format(value, ".9g")


def _dumps(value) -> str:
    if isinstance(value, bool):
        raise SchemaError("booleans do not appear in trace records")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = ",".join(f"{json.dumps(k)}:{_dumps(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_dumps(v) for v in value) + "]"
    raise SchemaError(f"unsupported wire value of type {type(value).__name__}")


def tensor_obj(array) -> dict:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim != 2:
        raise SchemaError("wire tensors are two-dimensional")
    return {"shape": [int(arr.shape[0]), int(arr.shape[1])],
            "data": [float(v) for v in arr.reshape(-1)]}


def grid_obj(rows: int, cols: int, patch_w: int, patch_h: int,
             image_w: int, image_h: int) -> dict:
    for name, value in (("rows", rows), ("cols", cols), ("patch_w", patch_w),
                        ("patch_h", patch_h), ("image_w", image_w),
                        ("image_h", image_h)):
        if not isinstance(value, int) or value < 1:
            raise SchemaError(f"grid field {name} must be a positive integer")
    return {"rows": rows, "cols": cols, "patch_w": patch_w, "patch_h": patch_h,
            "image_w": image_w, "image_h": image_h,
            "order": "row-major", "origin": "top-left"}


def embeddings_record(session_id: str, step: int, grid: dict,
                      assistant, thinking) -> dict:
    return {"session_id": session_id, "step": step, "grid": grid,
            "mode": "embeddings",
            "assistant_embeddings": tensor_obj(assistant),
            "thinking_embeddings": tensor_obj(thinking)}


def attention_record(session_id: str, step: int, grid: dict, attention) -> dict:
    return {"session_id": session_id, "step": step, "grid": grid,
            "mode": "attention", "attention": tensor_obj(attention)}


def serialize_record(record: dict) -> str:
    return _dumps(record)


def write_trace(path, records) -> None:
    """Write header plus one record per line; flushed per record so a
    crashed capture still leaves a parseable prefix."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(HEADER + "\n")
        handle.flush()
        for record in records:
            handle.write(serialize_record(record) + "\n")
            handle.flush()
