"""
Exception hierarchy for the simulator.

Every error also derives from ValueError so callers that only guard against
bad input keep working.
"""


class BFTSimError(Exception):
    """Base class for all simulator errors."""


class ParameterDomainError(BFTSimError, ValueError):
    """A parameter lies outside the domain of the operation."""


class UnstableQueueError(BFTSimError, ValueError):
    """M/M/1 utilization is at or above one."""


class InsufficientDataError(BFTSimError, ValueError):
    """Too few samples for the requested statistic."""


class DegenerateVarianceError(BFTSimError, ValueError):
    """Samples have zero spread."""


class MomentInfeasibleError(BFTSimError, ValueError):
    """Sample moments admit no beta distribution."""


class ScenarioDegenerateError(BFTSimError, ValueError):
    """The baseline BFT condition cannot be met by the scenario."""
