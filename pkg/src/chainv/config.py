"""Engine configuration: pipeline knobs, ablation toggles, scheduler settings.

The on-disk form is a single JSON object. Every key is optional and falls
back to the documented default; unknown keys are rejected. Schema:

``{
  "k": 3,
  "eps": 1e-8,
  "line_thickness": 3,
  "pixel_map_mode": "constant" | "bilinear",
  "enable_visual_assistant": true,
  "enable_patch_selection": true,
  "enable_atomic_hints": true,
  "enable_reliability": true,
  "reliability_rendering": "words" | "numbers" | "both" | "none",
  "insertion_mode": "replace" | "append",
  "scheduler": {
    "p_min": 0.2, "p_max": 0.9, "t_cap": 2048,
    "direction": "increasing" | "decreasing",
    "trigger_word": "Hold on",
    "wait_markers": ["wait", "hold on", "hmm", "let me double-check"],
    "rng_seed": 1234,
    "max_insertions_per_session": 3
  }
}``

Toggle semantics in the harness: ``enable_visual_assistant`` off disables
every use of the trace (pure baseline decode); ``enable_patch_selection``
off likewise leaves nothing to hint at; ``enable_atomic_hints`` off keeps
only the coarse box over the selected patches; ``enable_reliability`` off
drops consistency scoring, in which case rendered text carries no quality
slot. Reliability labeling requires the full hint set, so it is only active
when atomic hints are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ParseError, SchemaError
from .atomic_hints import DEFAULT_LINE_THICKNESS, PIXEL_MAP_MODES
from .patch_selection import DEFAULT_TOP_K, MIN_TOP_K
from .reliability import DEFAULT_EPS
from .scheduler import RENDER_MODES, SchedulerConfig

INSERTION_MODES = ("replace", "append")


@dataclass(frozen=True)
class EngineConfig:
    k: int = DEFAULT_TOP_K
    eps: float = DEFAULT_EPS
    line_thickness: int = DEFAULT_LINE_THICKNESS
    pixel_map_mode: str = "constant"
    enable_visual_assistant: bool = True
    enable_patch_selection: bool = True
    enable_atomic_hints: bool = True
    enable_reliability: bool = True
    reliability_rendering: str = "words"
    insertion_mode: str = "replace"
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < MIN_TOP_K:
            raise SchemaError("k", f"must be an integer >= {MIN_TOP_K}")
        if not isinstance(self.eps, (int, float)) or self.eps <= 0:
            raise SchemaError("eps", "must be a positive real")
        if isinstance(self.line_thickness, bool) or not isinstance(self.line_thickness, int) \
                or self.line_thickness < 1:
            raise SchemaError("line_thickness", "must be an integer >= 1")
        if self.pixel_map_mode not in PIXEL_MAP_MODES:
            raise SchemaError("pixel_map_mode", f"must be one of {PIXEL_MAP_MODES}")
        for name in ("enable_visual_assistant", "enable_patch_selection",
                     "enable_atomic_hints", "enable_reliability"):
            if not isinstance(getattr(self, name), bool):
                raise SchemaError(name, "must be a boolean")
        if self.reliability_rendering not in RENDER_MODES:
            raise SchemaError("reliability_rendering", f"must be one of {RENDER_MODES}")
        if self.insertion_mode not in INSERTION_MODES:
            raise SchemaError("insertion_mode", f"must be one of {INSERTION_MODES}")
        if not isinstance(self.scheduler, SchedulerConfig):
            raise SchemaError("scheduler", "must be a scheduler config object")

    @property
    def hints_active(self) -> bool:
        """Whether the harness may build and inject hints at all."""
        return self.enable_visual_assistant and self.enable_patch_selection

    @property
    def reliability_active(self) -> bool:
        return self.enable_reliability and self.enable_atomic_hints

    def with_seed(self, seed: int) -> "EngineConfig":
        return replace(self, scheduler=replace(self.scheduler, rng_seed=seed))


_ENGINE_KEYS = ("k", "eps", "line_thickness", "pixel_map_mode",
                "enable_visual_assistant", "enable_patch_selection",
                "enable_atomic_hints", "enable_reliability",
                "reliability_rendering", "insertion_mode", "scheduler")
_SCHEDULER_KEYS = ("p_min", "p_max", "t_cap", "direction", "trigger_word",
                   "wait_markers", "rng_seed", "max_insertions_per_session")


def _scheduler_from_obj(obj) -> SchedulerConfig:
    if not isinstance(obj, dict):
        raise SchemaError("scheduler", "expected an object")
    for key in obj:
        if key not in _SCHEDULER_KEYS:
            raise SchemaError(key, "unknown scheduler field")
    kwargs = dict(obj)
    if "wait_markers" in kwargs:
        markers = kwargs["wait_markers"]
        if not isinstance(markers, list) or not all(isinstance(m, str) for m in markers):
            raise SchemaError("wait_markers", "expected a list of strings")
        kwargs["wait_markers"] = tuple(markers)
    return SchedulerConfig(**kwargs)


def config_from_obj(obj) -> EngineConfig:
    if not isinstance(obj, dict):
        raise SchemaError("config", "expected an object")
    for key in obj:
        if key not in _ENGINE_KEYS:
            raise SchemaError(key, "unknown config field")
    kwargs = dict(obj)
    if "scheduler" in kwargs:
        kwargs["scheduler"] = _scheduler_from_obj(kwargs["scheduler"])
    return EngineConfig(**kwargs)


def config_to_obj(cfg: EngineConfig) -> dict:
    return {
        "k": cfg.k,
        "eps": cfg.eps,
        "line_thickness": cfg.line_thickness,
        "pixel_map_mode": cfg.pixel_map_mode,
        "enable_visual_assistant": cfg.enable_visual_assistant,
        "enable_patch_selection": cfg.enable_patch_selection,
        "enable_atomic_hints": cfg.enable_atomic_hints,
        "enable_reliability": cfg.enable_reliability,
        "reliability_rendering": cfg.reliability_rendering,
        "insertion_mode": cfg.insertion_mode,
        "scheduler": {
            "p_min": cfg.scheduler.p_min,
            "p_max": cfg.scheduler.p_max,
            "t_cap": cfg.scheduler.t_cap,
            "direction": cfg.scheduler.direction,
            "trigger_word": cfg.scheduler.trigger_word,
            "wait_markers": list(cfg.scheduler.wait_markers),
            "rng_seed": cfg.scheduler.rng_seed,
            "max_insertions_per_session": cfg.scheduler.max_insertions_per_session,
        },
    }


def load_config(path) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config: {exc.msg}", offset=exc.pos) from exc
    try:
        return config_from_obj(obj)
    except TypeError as exc:
        # dataclass rejected a keyword of the wrong shape
        raise SchemaError("config", str(exc)) from exc


def save_config(cfg: EngineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(config_to_obj(cfg), handle, indent=2)
        handle.write("\n")
