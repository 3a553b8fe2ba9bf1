"""Error types shared across the package."""


class DataFormatError(ValueError):
    """Malformed input table; carries the offending row/column when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NotCenteredError(RuntimeError):
    """Operation requires mean-centered curves."""


class DegenerateCovarianceError(ValueError):
    """Covariance input with an unusable grid point; names the index."""

    def __init__(self, message, index):
        super().__init__(f"{message} (grid index {index})")
        self.index = index


class NumericError(ValueError):
    """Non-finite values where finite numerics are required."""
