"""Exception types shared across the simulator.

Every error raised on a bad input or a broken replay is a subclass of
SimError so callers can catch one base class at the service boundary.
"""


class SimError(Exception):
    """Base class for all simulator errors."""


class FormatError(SimError):
    """A file or token stream does not match the expected dialect."""


class ShapeError(SimError):
    """Array dimensions are inconsistent with the declared geometry."""


class ParameterError(SimError, ValueError):
    """A configuration value is outside its admissible range."""


class TraceExhaustedError(SimError):
    """A loss trace ran out of tokens before the batch was covered."""


class ReplayError(SimError):
    """A cached loss map does not match the run that tries to reuse it."""


class AggregationError(SimError):
    """Run records are inconsistent and cannot be aggregated."""


class NumericalError(SimError):
    """A numerical routine (SVD, solver) failed to converge."""
