"""Error hierarchy shared by every module.

Each error carries a stable machine-readable ``code`` that the HTTP layer
maps onto a status code (see ``ptw.api.ERROR_STATUS``).  Guard failures use
the code form ``guard-failed:<guard-name>`` except for the three guards
that have their own first-class codes (``duplicate-signature``,
``missing-report``, ``self-confirmation-forbidden``).
"""

from __future__ import annotations


class PtwError(Exception):
    """Base error: ``code`` is machine-readable, ``message`` is for humans."""

    code = "internal"

    def __init__(self, message: str = "", *, code: str | None = None):
        super().__init__(message or self.code)
        if code is not None:
            self.code = code
        self.message = message or self.code


# --- lifecycle -------------------------------------------------------------

class InvalidWindowError(PtwError):
    code = "invalid-window"


class UnknownCategoryError(PtwError):
    code = "unknown-category"


class IllegalTransitionError(PtwError):
    code = "illegal-transition"


class WrongStatusError(PtwError):
    code = "wrong-status"


class GuardFailedError(PtwError):
    """A transition guard predicate did not hold.

    ``guard`` names the failing predicate (e.g. ``missing-gas-reading``,
    ``missing-signature:AreaInCharge``, ``contractor-certificate-expired``).
    """

    def __init__(self, guard: str, message: str = ""):
        self.guard = guard
        super().__init__(message or guard, code=f"guard-failed:{guard}")


class DuplicateSignatureError(GuardFailedError):
    def __init__(self, message: str = ""):
        super().__init__("duplicate-signature", message)
        self.code = "duplicate-signature"


class MissingReportError(GuardFailedError):
    def __init__(self, message: str = ""):
        super().__init__("missing-report", message)
        self.code = "missing-report"


class SelfConfirmationError(GuardFailedError):
    """Four-eyes closure: the confirmer must differ from the requester."""

    def __init__(self, message: str = ""):
        super().__init__("self-confirmation-forbidden", message)
        self.code = "self-confirmation-forbidden"


class OutOfOrderEntryError(PtwError):
    code = "out-of-order-entry"


# --- rbac ------------------------------------------------------------------

class UnauthorizedRoleError(PtwError):
    code = "unauthorized-role"


class UnknownUserError(PtwError):
    code = "unknown-user"


class BadCredentialError(PtwError):
    code = "bad-credential"


class InactiveUserError(PtwError):
    code = "inactive-user"


class InvalidTokenError(PtwError):
    code = "invalid-token"


class ExpiredTokenError(PtwError):
    code = "expired-token"


class DuplicateUserIdError(PtwError):
    code = "duplicate-user-id"


# --- registries ------------------------------------------------------------

class UnknownPermitLinkError(PtwError):
    code = "unknown-permit-link"


class InvalidSeverityError(PtwError):
    code = "invalid-severity"


class UnknownContractorError(PtwError):
    code = "unknown-contractor"


class InvalidIntervalError(PtwError):
    code = "invalid-interval"


class UnknownRecipientError(PtwError):
    code = "unknown-recipient"


# --- storage / api / ledger ------------------------------------------------

class NotFoundError(PtwError):
    code = "not-found"


class StorageFailureError(PtwError):
    code = "storage-failure"


class ConcurrencyConflictError(PtwError):
    """Optimistic version check failed; the caller may reload and retry."""

    code = "optimistic-concurrency-conflict"


class InvalidFilterError(PtwError):
    code = "invalid-filter"


class InvalidRangeError(PtwError):
    code = "invalid-range"


class ConfigError(PtwError):
    """Startup configuration is invalid; ``key`` names the offending entry."""

    code = "invalid-config"

    def __init__(self, key: str, message: str = ""):
        self.key = key
        super().__init__(f"config key '{key}': {message or 'invalid value'}")
