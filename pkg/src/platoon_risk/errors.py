"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`PlatoonRiskError`, so callers (and the CLI) can separate domain
failures from programming errors.
"""


class PlatoonRiskError(ValueError):
    """Base class for domain errors."""


class InvalidParameter(PlatoonRiskError):
    pass


class DisconnectedGraph(PlatoonRiskError):
    pass


class OutOfDomain(PlatoonRiskError):
    pass


class OutsideStabilityRegion(PlatoonRiskError):
    pass


class UnstablePlatoon(PlatoonRiskError):
    pass


class QuadratureFailure(PlatoonRiskError):
    pass


class InvalidSpec(PlatoonRiskError):
    pass


class InvalidSplit(PlatoonRiskError):
    pass


class SeriesDivergence(PlatoonRiskError):
    pass


class OutsideWindow(PlatoonRiskError):
    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = tuple(modes)


class IllConditionedBasis(PlatoonRiskError):
    pass


class InvalidTimestep(PlatoonRiskError):
    pass


class NonfiniteState(PlatoonRiskError):
    pass


class InsufficientSamples(PlatoonRiskError):
    pass
