"""Exception hierarchy shared by every module of the package."""


class EotMixError(Exception):
    """Base class for all errors raised by eotmix."""


class NotASimplexPoint(EotMixError, ValueError):
    pass


class InvalidCoupling(EotMixError, ValueError):
    pass


class ShapeMismatch(EotMixError, ValueError):
    pass


class DimensionMismatch(ShapeMismatch):
    pass


class EmptyInput(EotMixError, ValueError):
    pass


class NonPositiveWeights(EotMixError, ValueError):
    """Raised where a strictly positive weight vector is required."""


class NonFiniteCost(EotMixError, ValueError):
    pass


class DegenerateMarginal(EotMixError, ValueError):
    pass


class NonPositiveDefiniteCovariance(EotMixError, ValueError):
    pass


class InvalidDataset(EotMixError, ValueError):
    pass


class EmptyComponent(EotMixError, RuntimeError):
    """A mixture component lost (numerically) all of its mass.

    ``component`` is 1-based; ``sweep`` is set when raised from inside a fit.
    """

    def __init__(self, component: int, mass: float, sweep: int | None = None):
        self.component = component
        self.mass = mass
        self.sweep = sweep
        where = f" at sweep {sweep}" if sweep is not None else ""
        super().__init__(
            f"component {component} has column mass {mass:.3e} below the floor{where}"
        )


class ParseError(EotMixError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)


class RaggedRow(ParseError):
    pass


class SchemaVersionMismatch(EotMixError, ValueError):
    pass


class InvariantViolation(EotMixError, ValueError):
    pass
