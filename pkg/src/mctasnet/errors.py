"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """An argument violates an operation's precondition."""


class SamplingFailure(RuntimeError):
    """Rejection sampling ran out of attempts."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared in a tensor while debug checks are on."""
