"""Exception types shared across the package."""


class CplassError(Exception):
    """Base class for all package-specific errors."""


class InvalidChangepointsError(CplassError):
    """Changepoint times are not strictly increasing inside the observation window."""


class DegenerateFitError(CplassError):
    """The hinge design matrix is numerically rank-deficient; no unique fit exists."""


class DimensionMismatchError(CplassError):
    """Inputs refer to incompatible grid sizes or dimension counts."""


class EmptyPoolError(CplassError):
    """A segment pool or path collection contains no usable records."""


class GridError(CplassError):
    """An ingested time series does not lie on a uniform time grid."""


class TrajectoryParseError(CplassError):
    """A trajectory file could not be parsed (bad header, missing values, NaNs)."""


class SchemaVersionError(CplassError):
    """A persisted artifact declares an unsupported schema version."""
