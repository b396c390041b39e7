"""Exception hierarchy used across the package."""


class CvrspError(Exception):
    """Base class for all package errors."""


class StructuralError(CvrspError, ValueError):
    """Shapes, dimensions or keys do not fit together."""


class PhysicalityError(CvrspError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class InternalConsistencyError(CvrspError, RuntimeError):
    """A computation produced a result that a correct channel cannot produce."""


class ConfigError(CvrspError, ValueError):
    """Invalid run configuration.

    ``field`` names the offending entry in dotted form, ``line`` is the
    1-based line in the source document when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DataError(CvrspError, ValueError):
    """Malformed or misaligned input data files."""
