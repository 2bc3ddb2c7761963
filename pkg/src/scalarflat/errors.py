"""Exception types raised across the package."""


class ScalarFlatError(Exception):
    """Base class for all errors raised by scalarflat."""


class NorthPoleSingular(ScalarFlatError, ValueError):
    pass


class SampleTooCloseToSingularity(ScalarFlatError, ValueError):
    pass


class InvalidDimension(ScalarFlatError, ValueError):
    pass


class ZeroMass(ScalarFlatError, ValueError):
    pass


class InvalidParams(ScalarFlatError, ValueError):
    pass


class DomainError(ScalarFlatError, ValueError):
    pass


class GridTooCoarse(ScalarFlatError, ValueError):
    pass


class SolverStalled(ScalarFlatError, RuntimeError):
    pass


class MeasureSupportMismatch(ScalarFlatError, ValueError):
    pass


class CurveHitsAtom(ScalarFlatError, ValueError):
    pass


class RayBlocked(ScalarFlatError, ValueError):
    pass


class NoAdmissibleDirections(ScalarFlatError, RuntimeError):
    pass


class WolffDivergentAtOrigin(ScalarFlatError, ValueError):
    pass


class ConfigInvalid(ScalarFlatError, ValueError):
    """Scenario file or override failed validation.

    ``problems`` holds one ``(field, message)`` pair per failed check.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{field}: {msg}" for field, msg in self.problems]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))


class NumericBudgetExceeded(ScalarFlatError, RuntimeError):
    pass
