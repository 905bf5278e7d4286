"""Exception hierarchy shared across impactlab."""


class ImpactLabError(Exception):
    """Base class for every error raised deliberately by impactlab."""


class ConfigurationError(ImpactLabError, ValueError):
    """Invalid parameters, empty selections, or mismatched artifacts."""


class DataError(ImpactLabError):
    """Unreadable or structurally broken input data."""


class ContractError(ImpactLabError, ValueError):
    """A precondition of an operation was violated by the caller."""


class UnknownIdError(ImpactLabError, KeyError):
    """Lookup of a paper, author or venue id that is not in the corpus."""

    def __str__(self):
        return Exception.__str__(self)
