"""Error taxonomy shared across the package.

The split mirrors the harness exit codes: bad inputs (2), failed model
validation (3), and failures during an otherwise valid run (4).
"""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class ValidationFailure(RuntimeError):
    """A model-assumption check failed for an otherwise parseable setup."""


class RunFailure(RuntimeError):
    """The simulation aborted after validation had already passed."""


class UnsupportedCaseError(ConfigError):
    """Requested a theoretical rate outside the tabulated parameter cases."""
