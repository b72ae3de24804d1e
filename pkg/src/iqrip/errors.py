"""Exception hierarchy shared by every module."""


class IqripError(Exception):
    """Base class for all errors raised by this package."""


class DistributionError(IqripError, ValueError):
    """Invalid weights, ids or an empty distribution."""


class ParameterError(IqripError, ValueError):
    """A hyperparameter is outside its valid range."""


class ConsistencyError(IqripError):
    """Inputs that should come from the same source disagree."""


class InfiniteDivergenceError(IqripError, ValueError):
    """KL divergence is infinite because the reference leaves the support."""


class UndefinedFitError(IqripError, ValueError):
    """Not enough distinct data points for a regression."""


class InfinitePerplexityError(IqripError, ValueError):
    """A scored token received zero probability."""


class CorpusError(IqripError, ValueError):
    """Training corpus or prompt cannot be used with the model."""
