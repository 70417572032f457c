"""Exception types shared across the package."""


class UsageError(ValueError):
    """A caller violated a precondition (bad index, bad parameter, ...)."""


class GraphLoadError(ValueError):
    """Malformed graph text. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ComponentTooLargeError(RuntimeError):
    """Phase-2 exploration found a residual component above the cap.

    This is the algorithm's ERROR outcome, expected with probability
    1/poly(n); callers decide whether to count or abort.
    """

    def __init__(self, size_seen, cap):
        self.size_seen = size_seen
        self.cap = cap
        super().__init__(f"residual component has > {cap} vertices (saw {size_seen})")


class PhaseOneError(RuntimeError):
    """All candidate orderings were rejected in Phase 1."""
