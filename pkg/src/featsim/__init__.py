"""Feature transmission simulator: packet loss and concealment for deep
feature tensors, with reproducible Monte Carlo campaigns."""

__version__ = "0.1.0"
