"""Decoding-time visual hint engine.

From per-step attention traces over a visual-assistant image, the engine
selects salient patches, builds competing geometric hints (line, triangle,
box), scores their reliability by cross-token attention consistency, and
probabilistically injects the rendered winner whenever the decode stream
stalls at a wait marker.
"""

__version__ = "0.1.0"

from .config import EngineConfig
from .scheduler import SchedulerConfig
from .trace_model import GridSpec, HintRecord, TraceRecord

__all__ = [
    "EngineConfig",
    "GridSpec",
    "HintRecord",
    "SchedulerConfig",
    "TraceRecord",
    "__version__",
]
