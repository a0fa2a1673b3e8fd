"""Exception types raised across geolab."""


class GeolabError(Exception):
    """Base class for all library errors."""


class ModelViolation(GeolabError):
    """A point or matrix left its model beyond the configured tolerance."""


class NearDegenerate(GeolabError):
    """Classification is ambiguous at the configured tolerance."""


class NotLoxodromic(GeolabError):
    pass


class BudgetExceeded(GeolabError):
    """An enumeration passed its entry cap."""


class InsufficientData(GeolabError):
    pass


class NonTerminating(GeolabError):
    """Reduction did not settle; usually bad group data."""


class UnsupportedGroup(GeolabError):
    pass


class CoincidentEndpoints(GeolabError):
    pass


class EmptyInput(GeolabError):
    pass


class EmptyCensus(GeolabError):
    pass


class HypothesisNotMet(GeolabError):
    """Informational: an experiment's precondition does not hold."""


class ConfigError(GeolabError):
    pass
