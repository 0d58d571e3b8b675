"""Exception types shared across the package."""


class BoltzgradError(Exception):
    """Base class for all package errors."""


class InvalidConfigurationError(BoltzgradError, ValueError):
    """Particle configuration violates the exclusion or shape constraints."""


class PackingTooDenseError(BoltzgradError):
    """Rejection sampling ran out of proposals."""


class EventBudgetError(BoltzgradError):
    """Event-driven run exceeded its event budget."""


class PotentialDomainError(BoltzgradError, ValueError):
    """Potential evaluated outside the range where it is defined."""


class NumericalFailure(BoltzgradError, ArithmeticError):
    """A root-find or quadrature could not produce a result."""


class TrappedOrbitError(NumericalFailure):
    """Two-body orbit does not leave the interaction range."""


class AmbiguousInverseError(BoltzgradError, ValueError):
    """Deflection angle is not monotone in the impact parameter."""


class OutgoingConfigurationError(BoltzgradError, ValueError):
    """Pair is separating; there is no encounter to scatter."""


class ConfigError(BoltzgradError, ValueError):
    """Experiment configuration file is malformed."""


class BudgetExceeded(BoltzgradError):
    """Sampling or wall-clock budget exhausted."""
