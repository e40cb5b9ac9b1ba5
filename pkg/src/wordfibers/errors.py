"""Shared exception types."""


class CapExceeded(RuntimeError):
    """A configured size cap would be exceeded; raised instead of truncating."""


class BudgetExceeded(RuntimeError):
    """An evaluation budget would be exceeded by an exact computation."""


class WordSyntaxError(ValueError):
    """Malformed word expression; carries the character offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EmptyWordError(ValueError):
    """An operation that requires a nonempty word received the empty word."""
