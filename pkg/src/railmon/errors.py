"""Exception types shared across the pipeline."""


class RailmonError(Exception):
    """Base class for all railmon-specific errors."""


class ParameterError(RailmonError, ValueError):
    """A numeric or structural argument is out of its allowed range."""


class FaultSpecError(RailmonError, ValueError):
    """A fault specification is internally inconsistent."""


class SizeError(RailmonError, ValueError):
    """An input length violates a transform's size requirement."""


class ValidationError(RailmonError, ValueError):
    """A form or record violates a domain invariant.

    ``field`` names the offending field so callers can attach the error
    to it in a UI or API response.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class PermissionDeniedError(RailmonError):
    """The acting principal's role does not allow the operation."""


class UnknownAuthorError(RailmonError):
    """The author is not registered in the ledger keyring."""


class LedgerFormatError(RailmonError):
    """The persisted ledger log cannot be parsed."""


class TransportError(RailmonError):
    """A peer or gateway could not be reached."""


class InsufficientDataError(RailmonError):
    """Not enough samples to fit or score a model."""


class UnknownReferenceError(RailmonError):
    """A referenced ledger record does not exist."""


class IndeterminateDirectionError(RailmonError):
    """The two subunit signals are too close in time to order."""
