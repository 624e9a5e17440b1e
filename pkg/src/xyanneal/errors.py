"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from :class:`XYAnnealError`
so callers (and the CLI) can map failures to exit codes without catching
unrelated exceptions.
"""


class XYAnnealError(Exception):
    """Base class for library errors."""

    exit_code = 1


class AttemptsExhausted(XYAnnealError):
    """Hard-sphere sampler could not place a particle within ``max_attempts``."""

    exit_code = 10


class DegenerateGeometry(XYAnnealError, ValueError):
    """Two spins share a position, so a coupling would diverge."""

    exit_code = 11


class DimensionTooLarge(XYAnnealError, ValueError):
    """Requested Hilbert space exceeds the configured spin-count cap."""

    exit_code = 12


class NormDrift(XYAnnealError):
    """State norm left the allowed band during propagation."""

    exit_code = 13


class NonFiniteState(XYAnnealError):
    """State vector acquired NaN or inf entries."""

    exit_code = 14


class BadGrid(XYAnnealError, ValueError):
    """Probe points do not satisfy the fitting method's requirements."""

    exit_code = 15


class SectorInvalid(XYAnnealError, ValueError):
    """A parity sector was requested while the probe field breaks parity."""

    exit_code = 16


class EnsembleFailed(XYAnnealError):
    """Too many disorder realizations failed."""

    exit_code = 17


class ParseError(XYAnnealError, ValueError):
    """Config text is not valid JSON."""

    exit_code = 2

    def __init__(self, msg, line=None, column=None):
        super().__init__(msg if line is None else f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(XYAnnealError, ValueError):
    """Config is valid JSON but violates the schema or a precondition."""

    exit_code = 3

    def __init__(self, msg, key=None):
        super().__init__(msg)
        self.key = key
