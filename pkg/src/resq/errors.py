"""Exception hierarchy shared by all analysis stages."""


class ResqError(Exception):
    """Base class. ``stage`` names the pipeline step that failed, if known."""

    exit_code = 3

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class ValidationError(ResqError, ValueError):
    """Input data violates a documented invariant."""

    exit_code = 2


class ParseError(ValidationError):
    """A file could not be parsed; carries line/column when available."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{': '.join([', '.join(loc), message])}"
        super().__init__(message, stage="parse")
        self.path = path
        self.line = line
        self.column = column


class UnphysicalParametersError(ResqError, ValueError):
    pass


class DegenerateTraceError(ResqError):
    pass


class CollinearPointsError(ResqError):
    pass


class ConvergenceError(ResqError):
    pass


class SingularCovarianceError(ResqError):
    pass


class EmptyResultError(ResqError):
    pass


class WindowTooNarrowError(ResqError):
    pass


class TooFewPointsError(ValidationError):
    pass


class NoNormalStateError(ResqError):
    pass


class NoTransitionError(ResqError):
    pass


class MalformedStepsError(ValidationError):
    pass


class InputOutputError(ResqError, OSError):
    """A file could not be read or written."""

    exit_code = 4

    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path is not None else message, stage="io")
        self.path = path
