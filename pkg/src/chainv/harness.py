"""Scripted decode-loop harness and efficiency metrics.

The mock model is a script: an ordered list of text segments, each of which
may loop as a reflection cycle. Tokens are whitespace-separated words. A
segment whose text opens with a wait marker is an interception point: after
its first emission, every further repetition is preceded by one scheduler
draw, and a fired draw injects the rendered hint and breaks the cycle (in
``replace`` mode the hint supplants that repetition's wait text; in
``append`` mode it follows it).

Reports are serialized one per line in the same stream format as traces.
Wall time is measured for smoke checks only and deliberately kept out of
the wire form so that equal-seed runs produce byte-identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import pipeline
from .config import EngineConfig
from .errors import (
    AlignmentError,
    DivisionError,
    EmptyInputError,
    ParseError,
    RangeError,
    SchemaError,
)
from .scheduler import SchedulerState, detect_wait_token, should_trigger
from .trace_model import (
    HintRecord,
    TraceRecord,
    dumps_canonical,
    hint_record_from_obj,
    hint_record_to_obj,
    loads_object,
    read_record_stream,
    require_int,
    require_str,
    write_record_stream,
)


def count_tokens(text: str) -> int:
    """Whitespace token count; the harness's only tokenizer."""
    return len(text.split())


# ---------------------------------------------------------------------------
# scripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptSegment:
    """One scripted emission; ``loop_if_no_hint`` > 1 makes it a cycle."""

    text: str
    loop_if_no_hint: int = 0
    trace_step: int | None = None

    def __post_init__(self):
        require_str(self.text, "text")
        require_int(self.loop_if_no_hint, "loop_if_no_hint", minimum=0)
        if self.trace_step is not None:
            require_int(self.trace_step, "trace_step", minimum=0)


@dataclass(frozen=True)
class MockModelScript:
    """All segments of one session plus its scripted accuracy outcome."""

    session_id: str
    segments: tuple[ScriptSegment, ...]
    accuracy_flag: bool | None = None

    def __post_init__(self):
        require_str(self.session_id, "session_id")
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.accuracy_flag is not None and not isinstance(self.accuracy_flag, bool):
            raise SchemaError("accuracy_flag", "must be a boolean or null")


def _segment_from_obj(obj) -> ScriptSegment:
    if not isinstance(obj, dict):
        raise SchemaError("segments", "expected an object per segment")
    allowed = ("text", "loop_if_no_hint", "trace_step")
    for key in obj:
        if key not in allowed:
            raise SchemaError(key, "unknown segment field")
    if "text" not in obj:
        raise SchemaError("text", "missing field")
    return ScriptSegment(
        text=obj["text"],
        loop_if_no_hint=obj.get("loop_if_no_hint", 0),
        trace_step=obj.get("trace_step"),
    )


def load_script(path) -> list[MockModelScript]:
    """Read a script file: ``{"sessions": [...]}`` as documented in README."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"script: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(obj, dict) or "sessions" not in obj:
        raise SchemaError("sessions", "script must be an object with a sessions list")
    sessions = obj["sessions"]
    if not isinstance(sessions, list) or not sessions:
        raise SchemaError("sessions", "must be a non-empty list")
    scripts = []
    for entry in sessions:
        if not isinstance(entry, dict):
            raise SchemaError("sessions", "expected an object per session")
        allowed = ("session_id", "accuracy_flag", "segments")
        for key in entry:
            if key not in allowed:
                raise SchemaError(key, "unknown session field")
        if "session_id" not in entry or "segments" not in entry:
            raise SchemaError("session_id", "session needs session_id and segments")
        if not isinstance(entry["segments"], list):
            raise SchemaError("segments", "expected a list")
        scripts.append(MockModelScript(
            session_id=entry["session_id"],
            segments=tuple(_segment_from_obj(s) for s in entry["segments"]),
            accuracy_flag=entry.get("accuracy_flag"),
        ))
    ids = [s.session_id for s in scripts]
    if len(set(ids)) != len(ids):
        raise SchemaError("session_id", "duplicate session id in script")
    return scripts


# ---------------------------------------------------------------------------
# run reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Outcome of one mock-decoded session.

    ``wall_time`` is an in-process measurement; it is not serialized.
    """

    session_id: str
    output_tokens: int
    wait_tokens: int
    insertions: int
    hints: tuple[HintRecord, ...] = ()
    accuracy_flag: bool | None = None
    wall_time: float | None = None

    def __post_init__(self):
        require_str(self.session_id, "session_id")
        require_int(self.output_tokens, "output_tokens", minimum=0)
        require_int(self.wait_tokens, "wait_tokens", minimum=0)
        if self.wait_tokens > self.output_tokens:
            raise SchemaError("wait_tokens", "cannot exceed output_tokens")
        require_int(self.insertions, "insertions", minimum=0)
        object.__setattr__(self, "hints", tuple(self.hints))
        if self.insertions != len(self.hints):
            raise SchemaError("insertions", "must equal the number of hints")
        if self.accuracy_flag is not None and not isinstance(self.accuracy_flag, bool):
            raise SchemaError("accuracy_flag", "must be a boolean or null")


def serialize_run_report(report: RunReport) -> str:
    obj = {
        "session_id": report.session_id,
        "output_tokens": report.output_tokens,
        "wait_tokens": report.wait_tokens,
        "insertions": report.insertions,
        "accuracy_flag": report.accuracy_flag,
        "hints": [hint_record_to_obj(h) for h in report.hints],
    }
    return dumps_canonical(obj)


def parse_run_report(line: str) -> RunReport:
    obj = loads_object(line)
    fields = ("session_id", "output_tokens", "wait_tokens", "insertions",
              "accuracy_flag", "hints")
    for key in obj:
        if key not in fields:
            raise SchemaError(key, "unknown report field")
    for name in fields:
        if name not in obj:
            raise SchemaError(name, "missing field")
    if not isinstance(obj["hints"], list):
        raise SchemaError("hints", "expected a list")
    return RunReport(
        session_id=require_str(obj["session_id"], "session_id"),
        output_tokens=require_int(obj["output_tokens"], "output_tokens", minimum=0),
        wait_tokens=require_int(obj["wait_tokens"], "wait_tokens", minimum=0),
        insertions=require_int(obj["insertions"], "insertions", minimum=0),
        hints=tuple(hint_record_from_obj(h) for h in obj["hints"]),
        accuracy_flag=obj["accuracy_flag"],
    )


def read_run_reports(path) -> list[RunReport]:
    return read_record_stream(path, parse_run_report)


def write_run_reports(path, reports: Iterable[RunReport]) -> None:
    write_record_stream(path, reports, serialize_run_report)


# ---------------------------------------------------------------------------
# the decode loop
# ---------------------------------------------------------------------------


def index_traces(records: Iterable[TraceRecord]) -> dict[tuple[str, int], TraceRecord]:
    index: dict[tuple[str, int], TraceRecord] = {}
    for record in records:
        key = (record.session_id, record.step)
        if key in index:
            raise SchemaError("step", f"duplicate trace record for {key}")
        index[key] = record
    return index


def _check_alignment(script: MockModelScript,
                     traces: Mapping[tuple[str, int], TraceRecord],
                     cfg: EngineConfig) -> None:
    if not cfg.hints_active:
        return
    for segment in script.segments:
        iterations = max(1, segment.loop_if_no_hint)
        if iterations < 2 or not detect_wait_token(segment.text, cfg.scheduler):
            continue
        if segment.trace_step is None:
            raise AlignmentError(
                f"session '{script.session_id}': wait loop has no trace_step")
        if (script.session_id, segment.trace_step) not in traces:
            raise AlignmentError(
                f"session '{script.session_id}': no trace record for step "
                f"{segment.trace_step}")


def run_session(script: MockModelScript,
                traces: Mapping[tuple[str, int], TraceRecord],
                cfg: EngineConfig) -> RunReport:
    """Mock-decode one session under the given config.

    Deterministic: the emitted stream is a pure function of the script, the
    traces, and the config (including its seed).
    """
    started = time.perf_counter()
    _check_alignment(script, traces, cfg)
    state = SchedulerState.for_session(cfg.scheduler, script.session_id)
    output_tokens = 0
    wait_tokens = 0
    hints: list[HintRecord] = []

    def emit(text: str, as_wait: bool) -> None:
        nonlocal output_tokens, wait_tokens, state
        tokens = count_tokens(text)
        output_tokens += tokens
        if as_wait:
            wait_tokens += tokens
        state = state.add_tokens(tokens)

    for segment in script.segments:
        iterations = max(1, segment.loop_if_no_hint)
        is_wait = detect_wait_token(segment.text, cfg.scheduler)
        emit(segment.text, is_wait)
        for _ in range(1, iterations):
            fired = False
            if (is_wait and cfg.hints_active
                    and state.insertions_done < cfg.scheduler.max_insertions_per_session):
                fired, state = should_trigger(state, cfg.scheduler)
            if fired:
                record = traces[(script.session_id, segment.trace_step)]
                hint = pipeline.final_hint(record, cfg)
                if cfg.insertion_mode == "append":
                    emit(segment.text, as_wait=True)
                emit(hint.rendered_text, as_wait=False)
                state = state.record_insertion()
                hints.append(hint)
                break
            emit(segment.text, is_wait)

    return RunReport(
        session_id=script.session_id,
        output_tokens=output_tokens,
        wait_tokens=wait_tokens,
        insertions=len(hints),
        hints=tuple(hints),
        accuracy_flag=script.accuracy_flag,
        wall_time=time.perf_counter() - started,
    )


def run_sessions(scripts: Iterable[MockModelScript],
                 traces: Mapping[tuple[str, int], TraceRecord],
                 cfg: EngineConfig) -> list[RunReport]:
    """Run every session and report in sorted session-id order."""
    ordered = sorted(scripts, key=lambda s: s.session_id)
    return [run_session(script, traces, cfg) for script in ordered]


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def rep_score(accuracy: float, accuracy_base: float, tokens: float,
              t_max: float) -> float:
    """Reasoning-efficiency premium: accuracy gain scaled by token headroom.

    ``(accuracy - accuracy_base) * t_max / tokens`` with ``tokens`` the mean
    output length of the method and ``t_max`` the generation budget.
    """
    if tokens == 0:
        raise DivisionError("tokens must be nonzero")
    if tokens < 1:
        raise RangeError("tokens must be >= 1")
    if t_max < tokens:
        raise RangeError("t_max must be >= tokens")
    return (accuracy - accuracy_base) * t_max / tokens


@dataclass(frozen=True)
class Summary:
    """Aggregate over one report set; ``rep`` present when a baseline is."""

    count: int
    mean_output_tokens: float
    mean_wait_tokens: float
    mean_insertions: float
    mean_wall_time: float | None
    accuracy: float | None
    rep: float | None = None


def _accuracy_percent(reports) -> float | None:
    flags = [r.accuracy_flag for r in reports if r.accuracy_flag is not None]
    if not flags:
        return None
    return 100.0 * sum(flags) / len(flags)


def summarize_runs(reports, baseline=None, t_max: float | None = None) -> Summary:
    """Mean token/wait/time statistics, plus REP against a baseline set."""
    reports = list(reports)
    if not reports:
        raise EmptyInputError("no reports to summarize")
    count = len(reports)
    mean_tokens = sum(r.output_tokens for r in reports) / count
    mean_waits = sum(r.wait_tokens for r in reports) / count
    mean_inserts = sum(r.insertions for r in reports) / count
    times = [r.wall_time for r in reports]
    mean_time = sum(times) / count if all(t is not None for t in times) else None
    accuracy = _accuracy_percent(reports)
    rep = None
    if baseline is not None:
        if t_max is None:
            raise RangeError("t_max required to compute rep against a baseline")
        base_accuracy = _accuracy_percent(list(baseline))
        if accuracy is not None and base_accuracy is not None:
            rep = rep_score(accuracy, base_accuracy, mean_tokens, t_max)
    return Summary(
        count=count,
        mean_output_tokens=mean_tokens,
        mean_wait_tokens=mean_waits,
        mean_insertions=mean_inserts,
        mean_wall_time=mean_time,
        accuracy=accuracy,
        rep=rep,
    )
