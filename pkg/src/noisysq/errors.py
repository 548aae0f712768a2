class NoisySQError(Exception):
    """Base class for package errors."""


class ConfigError(NoisySQError, ValueError):
    """Invalid parameters or configuration."""


class ContractError(NoisySQError, ValueError):
    """A call violated an operation's precondition."""


class DegenerateNoiseError(NoisySQError):
    """Sample mean of 1 - 2*eta is not positive."""


class MagnitudeBoundError(NoisySQError):
    """Observed noise magnitude exceeds the supplied bound C."""


class LearnerFailure(NoisySQError):
    """A learner ran out of query budget or asked for a finer tolerance than declared."""
