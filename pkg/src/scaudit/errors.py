"""Exception types shared across the package."""


class AuditError(Exception):
    """Base class for every error this package raises deliberately."""


class SchemaError(AuditError):
    """A declared column is missing, duplicated, or the schema is malformed."""


class ParseError(AuditError):
    """A cell could not be parsed; the message names the row and column."""


class RecipeError(AuditError):
    """A preprocessing recipe is inconsistent or fails to cover the data."""


class PlanError(AuditError):
    """A split or replicate plan is invalid or indexed out of range."""


class MetricError(AuditError):
    """A metric is undefined for the given tallies or inputs."""


class InputError(AuditError):
    """Mismatched dimensions or grids, or non-finite values."""
