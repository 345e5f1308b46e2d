"""Trace capture: hook a model session, window its thinking tokens, and
emit wire records; verify them by round-tripping through the engine CLI."""

from __future__ import annotations

import json
import re
import subprocess
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import wire
from .errors import ExtractionError, ExtractionWarning, SchemaError
from .session import ModelSession, ToyMultimodalSession

LAYER_POLICIES = ("last_hidden", "mean_last4", "attn_layer_index")
DEFAULT_DELIMITERS = frozenset({".", "?", "!", "\n\n"})
DEFAULT_IMAGE_NOTE = ("The second image is the visual OCR, highlighted by a "
                      "red rectangle.")
MIN_WINDOW = 2


@dataclass(frozen=True)
class ExtractionConfig:
    model_id: str
    layer_policy: str = "last_hidden"
    attn_layer: int = -1
    n_a_window: int = 4
    sentence_delimiters: frozenset = DEFAULT_DELIMITERS
    assistant_image_note: str = DEFAULT_IMAGE_NOTE

    def __post_init__(self):
        if self.layer_policy not in LAYER_POLICIES:
            raise SchemaError(f"layer_policy must be one of {LAYER_POLICIES}")
        if not isinstance(self.n_a_window, int) or self.n_a_window < MIN_WINDOW:
            raise SchemaError(f"n_a_window must be an integer >= {MIN_WINDOW}")
        object.__setattr__(self, "sentence_delimiters",
                           frozenset(self.sentence_delimiters))
        if not self.sentence_delimiters:
            raise SchemaError("sentence_delimiters must not be empty")


@dataclass(frozen=True)
class HookedSession:
    """A session with hooks validated against the layer policy, plus the
    grid derived from the model's own vision configuration."""

    session: ModelSession
    cfg: ExtractionConfig
    grid: dict = field(init=False)

    def __post_init__(self):
        session, cfg = self.session, self.cfg
        if cfg.layer_policy == "mean_last4" and session.num_layers < 4:
            raise ExtractionError(
                f"mean_last4 needs >= 4 layers; model has {session.num_layers}")
        if cfg.layer_policy == "attn_layer_index":
            if not session.supports_attention:
                raise ExtractionError("model exposes no attention hooks")
            if not -session.num_layers <= cfg.attn_layer < session.num_layers:
                raise ExtractionError(
                    f"attn_layer {cfg.attn_layer} outside the model's "
                    f"{session.num_layers} layers")
        vision = session.vision_config()
        rows = -(-vision["image_h"] // vision["patch_h"])
        cols = -(-vision["image_w"] // vision["patch_w"])
        object.__setattr__(self, "grid", wire.grid_obj(
            rows=rows, cols=cols,
            patch_w=vision["patch_w"], patch_h=vision["patch_h"],
            image_w=vision["image_w"], image_h=vision["image_h"]))
        if rows * cols != session.patch_count():
            raise SchemaError(
                f"grid implies {rows * cols} patches but the vision tower "
                f"emits {session.patch_count()}")


def install_hooks(session: ModelSession, cfg: ExtractionConfig) -> HookedSession:
    return HookedSession(session=session, cfg=cfg)


def capture_step(hooked: HookedSession, session_id: str, step: int,
                 sentence_tokens: list[str]) -> dict | None:
    """One trace record from the current sentence window, or None (with a
    warning) when the window is shorter than the schema minimum."""
    cfg = hooked.cfg
    session = hooked.session
    window = sentence_tokens[-cfg.n_a_window:]
    if len(window) < MIN_WINDOW:
        warnings.warn(
            f"{session_id} step {step}: window of {len(window)} token(s) "
            f"is below the minimum of {MIN_WINDOW}; record skipped",
            ExtractionWarning, stacklevel=2)
        return None
    if cfg.layer_policy == "attn_layer_index":
        attention = session.attention_rows(window, cfg.attn_layer)
        return wire.attention_record(session_id, step, hooked.grid, attention)
    if cfg.layer_policy == "last_hidden":
        layers = [session.num_layers - 1]
    else:  # mean_last4
        layers = list(range(session.num_layers - 4, session.num_layers))
    assistant = np.mean([session.patch_embeddings(i) for i in layers], axis=0)
    thinking = np.mean([session.token_embeddings(window, i) for i in layers],
                       axis=0)
    if assistant.shape[0] != hooked.grid["rows"] * hooked.grid["cols"]:
        raise SchemaError("patch embedding count disagrees with the grid")
    return wire.embeddings_record(session_id, step, hooked.grid,
                                  assistant, thinking)


def _ends_sentence(token: str, delimiters) -> bool:
    return any(token.endswith(d) for d in delimiters)


def capture_run(hooked: HookedSession, session_id: str,
                max_steps: int) -> tuple[list[dict], int]:
    """Drive generation for up to max_steps bursts; one capture per burst
    using the reasoning sentence in effect at burst end. Returns the
    records plus the number of skipped (too-short) windows."""
    delimiters = hooked.cfg.sentence_delimiters
    records: list[dict] = []
    skipped = 0
    sentence: list[str] = []
    for step in range(max_steps):
        burst = hooked.session.generate_step()
        if burst is None:
            break
        closed: list[str] | None = None
        for token in burst:
            sentence.append(token)
            if _ends_sentence(token, delimiters):
                closed = list(sentence)
                sentence = []
        window_source = closed if closed is not None else sentence
        record = capture_step(hooked, session_id, step, window_source)
        if record is None:
            skipped += 1
        else:
            records.append(record)
    return records, skipped


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------

_TOY_SPEC = re.compile(r"^toy(?::(?P<opts>.*))?$")


def load_model(model_spec: str, prompt: str, cfg: ExtractionConfig) -> ModelSession:
    """Instantiate the hosted model named by ``model_spec``.

    ``toy[:k=v,...]`` builds the bundled deterministic session (options:
    seed, image WxH, patch WxH, layers, dim, attention 0/1). The prompt the
    session sees always carries the assistant-image note, matching the
    dual-image input convention.
    """
    match = _TOY_SPEC.match(model_spec)
    if not match:
        raise ExtractionError(f"unknown model '{model_spec}' (try 'toy')")
    kwargs = {}
    for item in filter(None, (match.group("opts") or "").split(",")):
        if "=" not in item:
            raise ExtractionError(f"bad toy option '{item}' (expected k=v)")
        key, value = item.split("=", 1)
        if key in {"seed", "layers", "dim"}:
            kwargs[key] = int(value)
        elif key in {"image", "patch"}:
            w, _, h = value.partition("x")
            kwargs[f"{key}_w"] = int(w)
            kwargs[f"{key}_h"] = int(h) if h else int(w)
        elif key == "attention":
            kwargs["with_attention"] = value not in {"0", "false", "no"}
        else:
            raise ExtractionError(f"unknown toy option '{key}'")
    full_prompt = prompt + "\n" + cfg.assistant_image_note
    return ToyMultimodalSession(model_spec, full_prompt, **kwargs)


# ---------------------------------------------------------------------------
# round-trip verification through the engine CLI
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundTripReport:
    records: int
    parse_rate: float
    hint_count: int
    hints_per_session: dict
    flagged_line: int | None = None
    engine_stderr: str = ""

    @property
    def clean(self) -> bool:
        return self.parse_rate == 1.0 and self.flagged_line is None


_LINE_FLAG = re.compile(r"line (\d+)")


def verify_roundtrip(trace_path, engine_cmd=("chainv",)) -> RoundTripReport:
    """Run the engine's ``select`` on a captured trace and report how much
    of it parsed and what it produced. Report-only: never raises for trace
    content, only for a missing engine binary."""
    trace_path = Path(trace_path)
    with open(trace_path, "r", encoding="utf-8") as handle:
        lines = [line for line in handle.read().splitlines() if line.strip()]
    records = max(0, len(lines) - 1)

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "roundtrip.hints"
        try:
            proc = subprocess.run(
                [*engine_cmd, "select", "--trace", str(trace_path),
                 "--out", str(out)],
                capture_output=True, text=True, check=False)
        except FileNotFoundError as exc:
            raise ExtractionError(
                f"engine command not found: {engine_cmd[0]}") from exc
        if proc.returncode == 0:
            hints_per_session: dict = {}
            hint_count = 0
            if out.exists():
                for line in out.read_text().splitlines()[1:]:
                    if not line.strip():
                        continue
                    hint_count += 1
                    sid = json.loads(line)["session_id"]
                    hints_per_session[sid] = hints_per_session.get(sid, 0) + 1
            return RoundTripReport(records=records, parse_rate=1.0,
                                   hint_count=hint_count,
                                   hints_per_session=hints_per_session)
        flagged = _LINE_FLAG.search(proc.stderr)
        flagged_line = int(flagged.group(1)) if flagged else None
        parsed = max(0, flagged_line - 2) if flagged_line else 0
        rate = 1.0 if records == 0 else parsed / records
        return RoundTripReport(records=records, parse_rate=rate,
                               hint_count=0, hints_per_session={},
                               flagged_line=flagged_line,
                               engine_stderr=proc.stderr.strip())
