"""Exception types raised across the package."""


class ParceError(Exception):
    """Base class for package errors."""


class DomainError(ParceError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConfigurationError(ParceError):
    """A configuration is missing, malformed, or inconsistent."""


class TrainingError(ParceError):
    """Model fitting could not proceed with the given data."""


class CalibrationError(ParceError):
    """Holdout data is insufficient to calibrate a loss model."""

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = tuple(classes)
