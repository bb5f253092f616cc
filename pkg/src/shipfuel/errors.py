"""Exception and warning types shared across the package."""


class ShipfuelError(Exception):
    """Base class for all domain errors."""


# --- report parsing ---

class MalformedPosition(ShipfuelError):
    pass


class OutOfRange(ShipfuelError):
    pass


class MalformedDate(ShipfuelError):
    pass


class AmbiguousTimezone(ShipfuelError):
    pass


class MissingColumn(ShipfuelError):
    pass


class RowParseError(ShipfuelError):
    """A report row was rejected; carries the row index and offending cell."""

    def __init__(self, row_index, column, cell, reason):
        super().__init__(f"row {row_index}, column {column!r}: {reason} (cell={cell!r})")
        self.row_index = row_index
        self.column = column
        self.cell = cell
        self.reason = reason


# --- gridded data ---

class FormatError(ShipfuelError):
    pass


class ShapeMismatch(ShipfuelError):
    pass


class NonDivisibleStep(ShipfuelError):
    pass


class OutOfBounds(ShipfuelError):
    """Query fell outside a grid axis; carries the axis name."""

    def __init__(self, axis, value=None):
        super().__init__(f"query outside {axis} axis" + (f" (value={value})" if value is not None else ""))
        self.axis = axis
        self.value = value


class AllMissing(ShipfuelError):
    pass


# --- fusion pipeline ---

class ResponseDropped(ShipfuelError):
    pass


class UnknownCategory(ShipfuelError):
    pass


# --- models ---

class SingularSystem(ShipfuelError):
    pass


# --- evaluation ---

class BadK(ShipfuelError):
    pass


class DegenerateVariance(ShipfuelError):
    pass


class BadDof(ShipfuelError):
    pass


# --- synthetic generator ---

class RouteOutOfBounds(ShipfuelError):
    pass


# --- cli / config ---

class ConfigError(ShipfuelError):
    pass


class ConvergenceWarning(UserWarning):
    """Iterative solver stopped at its iteration cap before reaching tolerance."""
