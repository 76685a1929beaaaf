"""Exception hierarchy for the extraction adapters."""


class ExtractorError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(ExtractorError):
    """An adapter configuration value is out of range."""


class ManifestError(ExtractorError):
    """An input or catalog manifest is malformed or inconsistent."""


class EmptyTextError(ExtractorError):
    """A note has no tokens; the caller omits the block instead of writing one."""


class DecodeError(ExtractorError):
    """An image file could not be decoded into a 2-D array."""


class CatalogMismatchError(ExtractorError):
    """A block's dimension disagrees with the shared catalog manifest."""
