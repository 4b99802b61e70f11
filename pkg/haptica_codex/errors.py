"""
Error hierarchy shared by all Haptica components.
"""

from typing import Optional


class HapticaError(Exception):
    """Base class for every error raised by Haptica."""


class NonDivisibleGrid(HapticaError, ValueError):
    """Grid dimensions are not divisible by the pooling factor."""


class NoContact(HapticaError):
    """No frame of a trial exceeds its contact threshold."""


class DegenerateSeries(HapticaError, ValueError):
    """A series has zero standard deviation (or too few samples) and cannot be scaled."""


class TooShortSequence(HapticaError, ValueError):
    """A training sequence is shorter than the number of HMM states."""


class UnstableIntegration(HapticaError):
    """Simulation state left the sanity bound; dt is too large for the stiffness."""


class LengthMismatch(HapticaError, ValueError):
    """A feature series does not have the expected window length."""


class RankDeficient(HapticaError, ValueError):
    """The data has no non-zero variance direction to project on."""


class InsufficientData(HapticaError, ValueError):
    """Not enough samples for the requested folds, components or models."""


class TrialFormatError(HapticaError, ValueError):
    """A trial, feature or manifest file does not follow the declared text format."""


class ModelFormatError(HapticaError, ValueError):
    """A model file does not follow the declared text format."""


class ConfigError(HapticaError, ValueError):
    """Configuration file could not be parsed or failed validation."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
