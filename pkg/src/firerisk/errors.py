"""Exception hierarchy shared across the toolkit."""


class FireRiskError(Exception):
    """Base class for all toolkit errors."""


class UserError(FireRiskError):
    """Bad input supplied by the user (CLI exits with status 2)."""


class ConfigError(UserError):
    pass


class SchemaError(UserError):
    """Input table is missing required columns."""


class LoadError(UserError):
    """Too many rows in an input file failed to parse."""


class JoinError(UserError):
    pass


class CpiLookupError(UserError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LabelError(UserError, ValueError):
    pass


class RateError(UserError):
    def __init__(self, message, counties=()):
        super().__init__(message)
        self.counties = list(counties)


class FamilyError(UserError, ValueError):
    """Response values are outside the support of the model family."""


class RankError(FireRiskError):
    """Penalized system is singular; ``term`` names the offending block."""

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class DegenerateFitError(UserError, ValueError):
    pass


class DataError(UserError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column
