"""Exception hierarchy shared by every module of the package."""


class FKError(Exception):
    """Base class for all errors raised by fkjump."""


class DegenerateWeight(FKError):
    """A Boltzmann-Gibbs normalizer vanished (measure and potential disagree)."""


class DimensionMismatch(FKError, ValueError):
    pass


class NotStochastic(FKError, ValueError):
    pass


class NotProbability(FKError, ValueError):
    pass


class HorizonExceeded(FKError, IndexError):
    pass


class IndexOrder(FKError, ValueError):
    pass


class SignViolation(FKError, ValueError):
    """The potential has the wrong sign for the requested selection case."""


class WrongPotentialSign(SignViolation):
    pass


class DegenerateRecycler(FKError):
    pass


class BadSize(FKError, ValueError):
    pass


class ModelMismatch(FKError, TypeError):
    pass


class UnboundedRate(FKError, ValueError):
    pass


class InsufficientPoints(FKError, ValueError):
    pass


class NonpositiveValue(FKError, ValueError):
    pass


class ConfigError(FKError, ValueError):
    """Malformed experiment or model configuration."""
