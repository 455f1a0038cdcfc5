"""Exception hierarchy shared by all qsure modules."""


class QsError(Exception):
    """Base class for every error raised by qsure."""


class ValidationError(QsError, ValueError):
    """Malformed input: wrong shape, unknown label, non-normalized prior, ...

    ``issues`` carries an itemized list of problems when more than one was
    found.
    """

    def __init__(self, message, issues=()):
        super().__init__(message)
        self.issues = list(issues) or [message]


class DominationError(ValidationError):
    """A measure charges an outcome that is polar for the prior family."""


class ContractError(QsError):
    """An operation was called outside its documented contract."""


class SizeError(QsError):
    """A brute-force routine was asked to exceed its hard size cap."""


class ArbitrageError(QsError):
    """Pricing was requested on a market that admits an arbitrage."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class InvariantError(QsError):
    """An internal consistency check failed; this is a library defect."""
