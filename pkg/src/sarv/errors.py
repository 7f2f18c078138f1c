"""Exception hierarchy shared by every Sarv module."""


class SarvError(Exception):
    """Base class for all errors raised by this package."""


class UnknownAddress(SarvError, KeyError):
    pass


class UnknownAsset(SarvError, KeyError):
    pass


class AddressKindError(SarvError, ValueError):
    """An address of the wrong kind was supplied (e.g. a node where a user is needed)."""


class LogRangeError(SarvError, IndexError):
    pass


class CycleError(SarvError):
    """Parent links loop back on themselves; the forest is corrupted."""


class ReplayError(SarvError, ValueError):
    """A log could not be folded into state.

    ``seq`` names the first offending entry.
    """

    def __init__(self, seq: int, message: str) -> None:
        super().__init__(f"seq {seq}: {message}")
        self.seq = seq


class MalformedOperation(SarvError, ValueError):
    pass


class AuthenticationError(SarvError):
    pass


class RequestRejected(SarvError):
    """A build or submit step refused the request before touching the ledger."""


class PreflightRejected(RequestRejected):
    def __init__(self, violations) -> None:
        self.violations = list(violations)
        codes = ", ".join(v.code.value for v in self.violations)
        super().__init__(f"preflight found violations: {codes}")
