"""Exception types shared across the package."""

from __future__ import annotations


class PosteditError(Exception):
    """Base class for all errors raised by this package."""


# --- edit-action calculus ---


class PositionOutOfRange(PosteditError):
    """An action's position is missing or not valid for the hypothesis."""


class TokenMismatch(PosteditError):
    """A DELETE names a token different from the one at its position."""


class TokenNotSerializable(PosteditError):
    """A token cannot be represented in the script wire grammar."""


class ParseError(PosteditError):
    """Input deviates from the script grammar.

    ``offset`` is the byte offset (UTF-8) of the first offending character,
    relative to the whitespace-trimmed input.  ``raw_text`` carries the full
    offending input when a backend produced it.
    """

    def __init__(self, message: str, offset: int, raw_text: str | None = None):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
        self.raw_text = raw_text


class EmptyPool(PosteditError):
    """An operation needs pool entries but the pool is empty."""


class EmptyBatch(PosteditError):
    """A batch-level statistic was requested for an empty batch."""


# --- retrieval ---


class DuplicateEntryId(PosteditError):
    """Two pool entries share an id."""


# --- prompting ---


class TemplateMismatch(PosteditError):
    """A template's role does not fit the prompt being built."""


class NoActionScript(PosteditError):
    """A NoAction script reached a consumer that requires edit actions."""


# --- backends ---


class BackendError(PosteditError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """A remote call failed after exhausting retries."""


class MalformedResponse(BackendError):
    """A remote response did not match the expected schema."""


class BudgetExceeded(BackendError):
    """The configured request cap was reached."""


class ReplayMiss(BackendError):
    """No recorded response exists for a prompt hash."""


class SkippedEdit(BackendError):
    """A direct edit could not be applied; the instance keeps its text."""


# --- dataset ---


class FormatError(PosteditError):
    """A corpus file violates its format.  ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyFile(PosteditError):
    """An ingested file contains no records."""


# --- metrics ---


class LengthMismatch(PosteditError):
    """Hypothesis and reference lists differ in length."""


class EmptyCorpus(PosteditError):
    """A metric was requested for an empty corpus."""


# --- pipeline / cli ---


class ConfigError(PosteditError):
    """A configuration value violates its invariants."""


class UsageError(PosteditError):
    """Bad command-line usage."""
