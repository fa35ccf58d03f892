"""Exception hierarchy shared by the smoothers, operators and estimator."""


class FsirError(Exception):
    """Base class for all errors raised by this package."""


class EmptyWindow(FsirError):
    """No observation falls inside the kernel window, even after widening."""


class DegenerateDesign(FsirError):
    """The local design matrix is rank deficient."""


class AllNonpositive(FsirError):
    """A covariance estimate has no positive eigenvalue."""


class RankTooSmall(FsirError):
    """More directions were requested than the regularized rank allows."""


class GridMismatch(FsirError):
    """Two functions are not defined on the same grid."""


class EmptyEstimateList(FsirError):
    pass


class DegenerateVariance(FsirError):
    pass


class ConfigInvalid(FsirError, ValueError):
    """An experiment or simulation configuration failed validation.

    Parameters
    ----------
    field : str
        Name of the offending configuration field.
    message : str
        Human-readable reason.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(FsirError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InconsistentResponse(FsirError):
    pass


class OutOfInterval(FsirError):
    pass
