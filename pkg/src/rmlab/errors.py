"""Exception hierarchy shared by all rmlab modules."""


class RmlabError(Exception):
    """Base class for every error raised by rmlab."""


class DimensionError(RmlabError, ValueError):
    pass


class ParameterError(RmlabError, ValueError):
    pass


class PreconditionError(RmlabError, ValueError):
    pass


class GuardError(RmlabError, ValueError):
    """An exhaustive enumeration was requested beyond its size guard."""


class UndefinedRatioError(RmlabError, ValueError):
    """``||T||_HS / ||T||`` is undefined because T is the zero matrix."""


class NoCertificateError(RmlabError):
    """No subset could be certified; ``best`` carries the best attempt."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateTraceError(RmlabError, ValueError):
    pass


class InsufficientDataError(RmlabError, ValueError):
    def __init__(self, message, excluded=()):
        super().__init__(message)
        self.excluded = list(excluded)
