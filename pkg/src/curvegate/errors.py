"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument or malformed input file (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to meet its contract (CLI exit code 3)."""


class UnreachableTargetError(InputError):
    """A displacement target cannot be met by the curve family searched."""
