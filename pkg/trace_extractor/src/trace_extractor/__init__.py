"""Trace capture for the visual hint engine's wire format."""

from .errors import ExtractionError, ExtractionWarning, ExtractorError, SchemaError
from .extractor import (
    DEFAULT_IMAGE_NOTE,
    ExtractionConfig,
    HookedSession,
    RoundTripReport,
    capture_run,
    capture_step,
    install_hooks,
    load_model,
    verify_roundtrip,
)
from .session import ModelSession, ToyMultimodalSession

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_IMAGE_NOTE",
    "ExtractionConfig",
    "ExtractionError",
    "ExtractionWarning",
    "ExtractorError",
    "HookedSession",
    "ModelSession",
    "RoundTripReport",
    "SchemaError",
    "ToyMultimodalSession",
    "capture_run",
    "capture_step",
    "install_hooks",
    "load_model",
    "verify_roundtrip",
    "__version__",
]
