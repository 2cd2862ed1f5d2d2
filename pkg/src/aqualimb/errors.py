"""Exception taxonomy shared across the package.

DataError and its subclasses cover bad input artifacts (CLI exit code 2);
UsageError covers command-line misuse (exit 1); anything else that escapes
is a runtime failure (exit 3).
"""


class PipelineError(Exception):
    pass


class DataError(PipelineError):
    """Input artifact is malformed or inconsistent."""


class ParseError(DataError):
    """File contents could not be parsed. Carries file/line context."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class ValidationError(DataError):
    """Well-formed data violates a stream or type invariant."""


class FormatError(DataError):
    """Unsupported container or encoding (e.g. non-PCM16 WAV)."""


class TrainingError(DataError):
    """Corpus unusable for training (e.g. classes missing)."""


class UsageError(PipelineError):
    """Command line or configuration misuse."""
