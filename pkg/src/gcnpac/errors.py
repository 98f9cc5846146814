"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class SizeError(ValidationError):
    """A requested matrix would exceed the configured size guard."""
