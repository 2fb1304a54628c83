class MaxMeanError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(MaxMeanError, ValueError):
    """Invalid system, policy or experiment configuration."""


class DomainError(MaxMeanError, ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetError(MaxMeanError, ValueError):
    """Sampling budget too small for the requested run."""


class InsufficientDataError(MaxMeanError, ValueError):
    """Not enough (post warm-up) samples to form an estimate."""


class DegenerateStatisticError(MaxMeanError, ValueError):
    """Test statistic undefined because the variance estimate is zero."""
