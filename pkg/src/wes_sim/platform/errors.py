"""Platform error hierarchy.

Each error carries the outcome string it maps to when an action is refused,
so the runner can log a refusal without special-casing the error type.
"""


class PlatformError(Exception):
    outcome = "error"


class IsolationViolation(PlatformError):
    outcome = "isolation_violation"


class PrivacyDenied(PlatformError):
    outcome = "privacy_denied"


class UnknownEntity(PlatformError):
    outcome = "unknown_entity"


class InvalidAction(PlatformError):
    outcome = "invalid"


class AlreadyFetched(PlatformError):
    outcome = "already_fetched"


class NotRecipient(PlatformError):
    outcome = "not_recipient"
