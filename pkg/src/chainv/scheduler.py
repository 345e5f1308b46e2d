"""Decode-time insertion scheduling and hint text rendering.

A hint may only be injected when the imminent output opens with a wait
marker. At such a point the scheduler draws one Bernoulli trial whose
probability anneals linearly with the number of tokens generated so far.
Randomness comes from a counter-based generator, so the full trigger
sequence is a pure function of (seed, session id, draw index) and can be
reproduced in any language from the description below.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import RangeError, SchemaError
from .trace_model import HintRecord

DEFAULT_WAIT_MARKERS = ("wait", "hold on", "hmm", "let me double-check")
DEFAULT_TRIGGER_WORD = "Hold on"
ANNEAL_DIRECTIONS = ("increasing", "decreasing")
RENDER_MODES = ("words", "numbers", "both", "none")

_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs of the insertion scheduler.

    ``direction`` selects whether the trigger probability climbs from
    ``p_min`` to ``p_max`` over the first ``t_cap`` tokens (``increasing``,
    the default: late reasoning gets more help) or mirrors that descent.
    """

    p_min: float = 0.2
    p_max: float = 0.9
    t_cap: int = 2048
    direction: str = "increasing"
    trigger_word: str = DEFAULT_TRIGGER_WORD
    wait_markers: tuple[str, ...] = DEFAULT_WAIT_MARKERS
    rng_seed: int = 1234
    max_insertions_per_session: int = 3

    def __post_init__(self):
        if not (0.0 <= self.p_min <= self.p_max <= 1.0):
            raise SchemaError("p_min", "need 0 <= p_min <= p_max <= 1")
        if self.t_cap < 1:
            raise SchemaError("t_cap", "must be >= 1")
        if self.direction not in ANNEAL_DIRECTIONS:
            raise SchemaError("direction", f"must be one of {ANNEAL_DIRECTIONS}")
        markers = tuple(str(m) for m in self.wait_markers)
        if not markers:
            raise SchemaError("wait_markers", "must not be empty")
        object.__setattr__(self, "wait_markers", markers)
        if isinstance(self.rng_seed, bool) or not isinstance(self.rng_seed, int):
            raise SchemaError("rng_seed", "must be an integer")
        if self.max_insertions_per_session < 0:
            raise SchemaError("max_insertions_per_session", "must be >= 0")


@dataclass(frozen=True)
class SchedulerState:
    """Progress of one session: token count, insertions, and the RNG cursor."""

    session_seed: int
    tokens_generated: int = 0
    insertions_done: int = 0
    draw_index: int = 0

    @classmethod
    def for_session(cls, cfg: SchedulerConfig, session_id: str) -> "SchedulerState":
        return cls(session_seed=(cfg.rng_seed ^ fnv1a64(session_id)) & _MASK64)

    def add_tokens(self, count: int) -> "SchedulerState":
        if count < 0:
            raise RangeError("token count cannot decrease")
        return replace(self, tokens_generated=self.tokens_generated + count)

    def record_insertion(self) -> "SchedulerState":
        return replace(self, insertions_done=self.insertions_done + 1)


# ---------------------------------------------------------------------------
# deterministic randomness
# ---------------------------------------------------------------------------


def fnv1a64(text: str) -> int:
    """FNV-1a hash of the UTF-8 bytes, used to derive per-session seeds."""
    value = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        value = ((value ^ byte) * _FNV_PRIME) & _MASK64
    return value


def _mix64(value: int) -> int:
    value &= _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def counter_random(seed: int, index: int) -> float:
    """Uniform draw in [0, 1) fully determined by (seed, draw index).

    The 64-bit word ``mix(seed + (index + 1) * 0x9E3779B97F4A7C15)`` is
    finalized with the usual shift-xor-multiply mixer and its top 53 bits
    become the mantissa. No state is carried between draws.
    """
    word = _mix64((seed + (index + 1) * _GOLDEN64) & _MASK64)
    return (word >> 11) * (2.0 ** -53)


# ---------------------------------------------------------------------------
# trigger schedule
# ---------------------------------------------------------------------------


def trigger_probability(tokens_generated: int, cfg: SchedulerConfig) -> float:
    """Linearly annealed insertion probability after ``tokens_generated``.

    The ramp is clamped once ``t_cap`` tokens have been produced. Both ends
    of the ramp are exact (the interpolation formula alone can land one
    rounding step away from ``p_max``), and interior values are pinned into
    ``[p_min, p_max]`` so the bound survives floating-point overshoot.
    """
    if tokens_generated < 0:
        raise RangeError("tokens_generated must be >= 0")
    ramp = min(tokens_generated / cfg.t_cap, 1.0)
    if cfg.direction == "increasing":
        if ramp >= 1.0:
            return cfg.p_max
        value = cfg.p_min + (cfg.p_max - cfg.p_min) * ramp
    else:
        if ramp >= 1.0:
            return cfg.p_min
        value = cfg.p_max - (cfg.p_max - cfg.p_min) * ramp
    return min(max(value, cfg.p_min), cfg.p_max)


def should_trigger(state: SchedulerState,
                   cfg: SchedulerConfig) -> tuple[bool, SchedulerState]:
    """One Bernoulli trial at the current annealed probability.

    Always consumes exactly one draw, so the decision sequence of a session
    depends only on the seed and the order of consultations.
    """
    probability = trigger_probability(state.tokens_generated, cfg)
    value = counter_random(state.session_seed, state.draw_index)
    fired = value < probability
    return fired, replace(state, draw_index=state.draw_index + 1)


def detect_wait_token(next_text: str, cfg: SchedulerConfig) -> bool:
    """True when the imminent output opens with a configured wait marker.

    Matching is case-folded and ignores surrounding whitespace, so
    ``"  Wait, maybe..."`` matches the marker ``"wait"``.
    """
    folded = next_text.strip().casefold()
    return any(folded.startswith(marker.casefold()) for marker in cfg.wait_markers)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _quality_slot(hint: HintRecord, rendering: str) -> str:
    if rendering == "words":
        return hint.quality
    if rendering == "numbers":
        return f"{hint.consistency:.2f}"
    if rendering == "both":
        return f"{hint.quality} ({hint.consistency:.2f})"
    return ""


def render_hint_text(hint: HintRecord, cfg: SchedulerConfig,
                     rendering: str = "words") -> str:
    """The exact sentence injected into the decode stream.

    Default form:
    ``Hold on. The {quality} highlight location in the second image is
    <{kind}>{coords}</{kind}>.`` with integer coordinates and no spaces
    inside the coordinate list. ``rendering`` swaps the quality word for the
    consistency value at two decimals (``numbers``), shows both, or drops
    the slot entirely (``none``).
    """
    if rendering not in RENDER_MODES:
        raise RangeError(f"rendering must be one of {RENDER_MODES}")
    coords = ",".join(f"({x},{y})" for x, y in hint.vertices)
    slot = _quality_slot(hint, rendering)
    quality_part = f"{slot} " if slot else ""
    return (f"{cfg.trigger_word}. The {quality_part}highlight location in the "
            f"second image is <{hint.hint_kind}>{coords}</{hint.hint_kind}>.")
