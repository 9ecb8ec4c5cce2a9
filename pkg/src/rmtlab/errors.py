"""Exception types shared across the package."""


class RmtlabError(Exception):
    pass


class DomainError(RmtlabError, ValueError):
    """Argument outside the domain where a formula is defined."""


class MismatchError(RmtlabError):
    """Two objects that should describe the same graph do not."""


class EmptyLayerError(RmtlabError):
    """A BFS layer ran empty before the requested depth."""


class NotATree(RmtlabError):
    pass


class SingularM1(RmtlabError):
    pass


class ForbiddenLambda(RmtlabError):
    """lambda**2 coincides with |X_jl|**2 for some entry."""


class BracketError(RmtlabError):
    pass


class PreconditionFailed(RmtlabError):
    pass
