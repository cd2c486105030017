"""Exception hierarchy; `category` feeds the CLI's machine-parseable error line."""


class EmgRankError(Exception):
    """Base class for all errors raised by this package."""

    category = "internal"


class ConfigError(EmgRankError):
    """Invalid or unknown configuration keys/values."""

    category = "config"


class SchemaError(EmgRankError):
    """Feature-table or recording file does not match the expected schema."""

    category = "schema"


class InputError(EmgRankError):
    """A file or directory could not be read or parsed."""

    category = "io"


class ValidationError(EmgRankError, ValueError):
    """An operation was called with arguments violating its preconditions."""

    category = "invalid"
