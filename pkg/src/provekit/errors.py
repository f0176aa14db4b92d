"""Exception hierarchy shared across the package."""


class ProvekitError(Exception):
    """Base class for all package errors."""


# --- statement parsing ---

class ParseError(ProvekitError):
    def __init__(self, message, offset=None, expected=None):
        self.offset = offset
        self.expected = expected
        detail = message
        if offset is not None:
            detail += f" (at byte offset {offset}"
            if expected:
                detail += f", expected {expected}"
            detail += ")"
        super().__init__(detail)


class MultipleTheorems(ParseError):
    pass


class AlreadyNegated(ProvekitError):
    pass


# --- verification ---

class VerifierTimeout(ProvekitError):
    pass


class BackendUnavailable(ProvekitError):
    """Verifier child process died; the request may be retried."""


class ProtocolError(ProvekitError):
    """Wire-protocol violation, e.g. a response id that was never requested."""


# --- generation ---

class UnknownTemplate(ProvekitError):
    pass


class MissingPlaceholder(ProvekitError):
    pass


class BackendError(ProvekitError):
    """Generation backend failed after exhausting retries."""


class BudgetExhausted(ProvekitError):
    pass


# --- pipeline / metrics ---

class EmptyCorpus(ProvekitError):
    pass


class RepairFailed(ProvekitError):
    pass


class DomainError(ProvekitError):
    pass


# --- rl data prep ---

class InsufficientPool(ProvekitError):
    def __init__(self, pool, needed, available):
        self.pool = pool
        self.needed = needed
        self.available = available
        super().__init__(
            f"{pool} pool too small: need {needed}, have {available}"
        )


class DegenerateGroup(ProvekitError):
    pass


# --- checkpoint averaging ---

class ShapeMismatch(ProvekitError):
    pass


class KeyMismatch(ProvekitError):
    pass


class AlphaOutOfRange(ProvekitError):
    pass


class FormatError(ProvekitError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message += f" (at byte offset {offset})"
        super().__init__(message)


class DigestMismatch(ProvekitError):
    pass


# --- synthesis ---

class ExtractionEmpty(ProvekitError):
    pass


class JudgeParseError(ProvekitError):
    pass
