"""Exception hierarchy.

Every error carries a ``category`` string used by the command line to build
its machine-parsable failure prefix and to pick an exit code.
"""


class RapdError(Exception):
    category = "Error"
    exit_code = 4


class InputError(RapdError):
    """Bad input data or parameters (exit code 2)."""

    exit_code = 2


class AnalysisError(RapdError):
    """The data was readable but could not be scored (exit code 3)."""

    exit_code = 3


class InvalidParameter(InputError, ValueError):
    category = "InvalidParameter"


class ParseError(InputError):
    category = "ParseError"


class SchemaMismatch(InputError):
    category = "SchemaMismatch"


class MissingFrame(InputError):
    category = "MissingFrame"


class NonMonotonicTimestamps(InputError):
    category = "NonMonotonicTimestamps"


class DuplicateTimestamp(InputError):
    category = "DuplicateTimestamp"


# detection stage failures; detect_pupil folds these into invalid measurements
class DetectionError(AnalysisError):
    category = "DetectionError"


class NoCandidate(DetectionError):
    category = "NoCandidate"


class NoContour(DetectionError):
    category = "NoContour"


class DegenerateGeometry(DetectionError):
    category = "DegenerateGeometry"


class TooSparse(AnalysisError):
    category = "TooSparse"


class InsufficientData(AnalysisError):
    category = "InsufficientData"

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class EmptyInput(AnalysisError):
    category = "EmptyInput"


class NonPositiveMedian(AnalysisError):
    category = "NonPositiveMedian"


class InvariantFailure(RapdError):
    category = "InvariantFailure"
    exit_code = 4
