class DomainError(ValueError):
    """Input outside the mathematical domain of a transform."""


class ConfigError(ValueError):
    """Invalid configuration or structurally malformed input."""
