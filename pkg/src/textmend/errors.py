"""Exception hierarchy and process exit codes."""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class TextmendError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TextmendError):
    """Malformed configuration, unknown key, or missing template."""


class DataError(TextmendError):
    """Malformed or inconsistent input data."""


class BackendError(TextmendError):
    """A chat or embedding backend failed permanently."""


class TransientBackendError(BackendError):
    """A backend failure worth retrying (transport hiccup, 429/5xx)."""


class EmptyOutputError(BackendError):
    """The backend returned an empty completion."""


class ExpansionError(BackendError):
    """Corpus expansion failed for a term or sentence."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term
