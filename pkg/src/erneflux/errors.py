"""Exception types shared across the package."""


class InfeasibleGeometryError(ValueError):
    """The reporter does not fit through the junction (r >= min radius)."""


class DataError(ValueError):
    """Input data violates a precondition (coverage, positivity, ...)."""


class DegenerateFitError(DataError):
    """A curve fit required by a pipeline step has no usable solution."""


class ConfigError(ValueError):
    """A run configuration file is malformed or violates an invariant."""
