"""Exception and warning types shared across the package."""


class MmsummError(Exception):
    """Base class for every error raised by this package."""


class ContractError(MmsummError):
    """A caller violated an operation's precondition."""


class ShapeError(ContractError):
    def __init__(self, message, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class ConfigError(ContractError):
    pass


class LengthError(ContractError):
    pass


class FormatError(ContractError):
    """Malformed file contents (bad header, truncated payload, misaligned lines)."""


class InputError(ContractError):
    pass


class NumericError(MmsummError):
    """A non-finite value appeared where finite values are required."""

    def __init__(self, message, node_id=None, sample_id=None):
        super().__init__(message)
        self.node_id = node_id
        self.sample_id = sample_id


class TruncationWarning(UserWarning):
    """An input stream was longer than its fixed slot and was cut."""
