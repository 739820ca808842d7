"""Exception hierarchy shared by the library and the command line."""


class GofError(Exception):
    """Base class for all errors raised by :mod:`bfgof`."""

    code = "error"


class DomainError(GofError, ValueError):
    """An argument lies outside the domain of a function."""

    code = "domain_error"


class SupportError(GofError, ValueError):
    """Data or evaluation points are incompatible with a declared support."""

    code = "support_error"


class DataError(GofError, ValueError):
    """Input data could not be parsed or is unusable."""

    code = "data_error"


class ConfigError(GofError, ValueError):
    """Invalid combination of options or parameters."""

    code = "config_error"
