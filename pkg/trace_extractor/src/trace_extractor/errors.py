"""Error taxonomy for trace capture."""


class ExtractorError(Exception):
    """Base class for everything this package raises on purpose."""


class ExtractionError(ExtractorError):
    """Model hosting or hook failure: unknown model, invalid layer policy,
    missing engine binary."""


class SchemaError(ExtractorError):
    """An emitted record would violate the trace wire schema, e.g. the
    vision tower's patch count disagrees with the derived grid."""


class ExtractionWarning(UserWarning):
    """Non-fatal capture issue, e.g. a window too short to record."""
