"""Exception hierarchy shared by all modules."""


class BtckitError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(BtckitError):
    """Malformed or inconsistent input data (files, labels, shapes)."""


class NumericalError(BtckitError):
    """Numerical failure: non-PD factorization, non-convergence, non-finite values."""


class ConfigError(BtckitError):
    """Invalid parameter or configuration value."""
