"""Exception taxonomy shared by all pipeline stages.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, ScorerProtocolError -> 3.
"""


class EvirankError(Exception):
    pass


class ConfigError(EvirankError):
    """Bad configuration value or command usage."""


class DataError(EvirankError):
    """Invalid, inconsistent, or missing input data."""


class ScorerProtocolError(EvirankError):
    """Scorer service unreachable or its response violates the wire protocol."""
