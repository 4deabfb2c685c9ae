"""Exception types shared across the simulator."""

from __future__ import annotations


class StructuralError(ValueError):
    """Malformed input: mismatched key lengths, bad positions, empty folds."""


class ProtocolViolation(RuntimeError):
    """A participant tried an operation the protocol does not allow them."""


class FeasibilityError(ValueError):
    """A collusive plan cannot steer every honest sequence in time."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class DetectionAbort(RuntimeError):
    """Raised when a decoy or GHZ correlation check fails and the run stops.

    ``period`` is the period in which the check ran and ``edge`` the
    ``(sender, receiver)`` pair that performed it.
    """

    def __init__(self, period: int, edge: tuple[int, int], failed: int, sequence: str = ""):
        self.period = period
        self.edge = edge
        self.failed = failed
        self.sequence = sequence
        super().__init__(
            f"detection failed in period {period} on edge {edge[0]}->{edge[1]}"
            f" ({failed} decoys disturbed{', ' + sequence if sequence else ''})"
        )
