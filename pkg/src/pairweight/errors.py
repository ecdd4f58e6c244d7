"""Exception hierarchy for pairweight."""


class PairWeightError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(PairWeightError, ValueError):
    pass


class DegenerateRow(PairWeightError, ValueError):
    """A row has (near) zero norm and cannot be L2-normalized."""

    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"rows with norm < 1e-12 cannot be normalized: {self.rows}")


# sampling
class InsufficientClasses(PairWeightError, ValueError):
    pass


class InsufficientSamplesPerClass(PairWeightError, ValueError):
    pass


class BatchTooLarge(PairWeightError, ValueError):
    pass


# mining
class InvalidThresholds(PairWeightError, ValueError):
    pass


class NegativeMargin(PairWeightError, ValueError):
    pass


# weighting / losses
class PreconditionViolation(PairWeightError, ValueError):
    pass


class WeightMiningMismatch(PairWeightError, ValueError):
    pass


class StructureViolation(PairWeightError, ValueError):
    pass


class InvalidTemperature(PairWeightError, ValueError):
    pass


# model
class CacheMismatch(PairWeightError, ValueError):
    pass


# training / evaluation / io
class TrainingAborted(PairWeightError, RuntimeError):
    """Raised when a training step produces a non-finite loss."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class SingletonClass(PairWeightError, ValueError):
    pass


class TooFewClasses(PairWeightError, ValueError):
    pass


class InvalidParams(PairWeightError, ValueError):
    pass


class ParseError(PairWeightError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RaggedRows(ParseError):
    pass


class ConfigError(PairWeightError, ValueError):
    """Invalid configuration document; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        self.detail = message
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
