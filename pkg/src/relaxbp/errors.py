"""Exception types shared across the package."""

__all__ = [
    "ZeroVector", "TooLarge", "ZeroDistribution", "GraphConstructionFailed",
    "Empty", "IllegalAdversaryChoice", "FormatError", "CapacityExceeded",
]


class ZeroVector(ValueError):
    """A vector that must be normalizable summed to zero.

    Signals a contradictory model (e.g. unsatisfiable hard constraints
    meeting), not a numeric accident worth papering over.
    """


class TooLarge(ValueError):
    """The joint state space exceeds the brute-force guard."""


class ZeroDistribution(ValueError):
    """The full joint distribution has zero total mass."""


class GraphConstructionFailed(RuntimeError):
    """Rejection sampling for a random graph exceeded its restart budget."""


class Empty(Exception):
    """Delete from a scheduler that holds no live task."""


class IllegalAdversaryChoice(RuntimeError):
    """An adversary policy returned a task outside its legal window."""


class FormatError(ValueError):
    """A model/marginals/truth file failed to parse."""


class CapacityExceeded(RuntimeError):
    """A bounded scheduler queue overflowed even after compaction."""
