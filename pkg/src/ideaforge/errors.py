"""Exception hierarchy shared by all ideaforge modules.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class IdeaForgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IdeaForgeError):
    """Invalid configuration or usage (bad parameter values, bad config file)."""


class DataError(IdeaForgeError):
    """Problems with input data or pipeline artifacts (unreadable files,
    missing columns, missing or stale stage artifacts)."""
