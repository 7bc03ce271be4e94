"""Exception types shared across the package.

The CLI maps these to exit codes: usage problems exit 1, bad or infeasible
data exits 2, transport failures exit 3.
"""


class KCrossError(Exception):
    """Base class for everything raised on purpose by this package."""


class GraphParseError(KCrossError):
    """A KG input line could not be parsed. Carries file and line number."""

    def __init__(self, source: str, line_no: int, reason: str):
        super().__init__(f"{source}:{line_no}: {reason}")
        self.source = source
        self.line_no = line_no
        self.reason = reason


class EmptyGraphError(KCrossError):
    """No triples survived loading and filtering."""


class SamplingError(KCrossError):
    """A sampling step cannot proceed (empty center pool, too few nodes, ...)."""


class DegenerateGraphError(SamplingError):
    """Downsampling collapsed the neighborhood below a usable size."""


class TierInfeasibleError(SamplingError):
    """Not enough rule-compliant distractors for the requested tier."""


class RenderError(KCrossError):
    """Prompt rendering was asked for something inconsistent."""


class DataError(KCrossError):
    """A dataset file or record violates the wire format or an invariant."""


class TransportError(KCrossError):
    """The HTTP responder gave up after exhausting its retry budget."""

    def __init__(self, message: str, last_status: int | None = None):
        super().__init__(message)
        self.last_status = last_status
