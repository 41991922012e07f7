class SrtlabError(Exception):
    exit_code = 1


class ConfigError(SrtlabError, ValueError):
    exit_code = 2


class InvariantError(SrtlabError):
    """A built object failed one of its checked invariants."""

    exit_code = 3


class BudgetError(SrtlabError):
    """A requested computation exceeds the declared resource budget."""

    exit_code = 4
