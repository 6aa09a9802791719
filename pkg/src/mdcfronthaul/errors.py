"""Exception types raised by the library."""


class ParameterError(ValueError):
    """An argument lies outside the model's domain."""


class DomainError(ArithmeticError):
    """A log-det argument is not positive definite (the rate is unbounded)."""


class InfeasibleStartError(RuntimeError):
    """The optimizer could not find or was handed an infeasible start."""


class ConfigError(ValueError):
    """A sweep configuration does not match the schema."""
