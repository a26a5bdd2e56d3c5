"""Exception types shared across the package."""


class EddaError(Exception):
    """Base class for package-specific errors."""


class ShapeMismatchError(EddaError, ValueError):
    """Input dimensions do not match what an operation expects."""


class ConfigurationError(EddaError, ValueError):
    """Invalid configuration: unknown layer, bad strategy/task pairing, bad keys."""


class FormatError(EddaError, RuntimeError):
    """Malformed on-disk artifact (archive record, checkpoint, report file)."""


class GenerationError(EddaError, RuntimeError):
    """Synthetic data generation could not satisfy its constraints."""
