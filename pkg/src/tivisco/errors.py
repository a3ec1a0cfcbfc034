"""Exception hierarchy shared by all modules."""


class TivError(Exception):
    """Base class for package errors."""


class SingularTensorError(TivError):
    """A tensor that must be inverted is (numerically) singular."""


class InvalidMaterialError(TivError):
    """Material constants violate a positivity or stability requirement."""


class InvalidDeformationError(TivError):
    """A deformation gradient has a non-positive determinant."""


class StepRejected(TivError):
    """A local or global Newton loop failed; the caller should cut the step."""


class CalibrationError(TivError):
    """Calibration input is inconsistent or degenerate."""


class ExtractionError(TivError):
    """A curve feature (e.g. a yield point) could not be located."""


class ConfigError(TivError, ValueError):
    """A configuration or fixture file is malformed."""
