"""Exception types shared across the package."""


class FraclimError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FraclimError):
    pass


class InvalidParams(FraclimError):
    pass


class GradientUnavailable(FraclimError):
    """Raised when an operation needs an analytic gradient the field lacks."""


class NonIntegrableField(FraclimError):
    pass


class DiagonalPoint(FraclimError):
    """The kernel is singular on x = y; engines must never get there."""


class IndicatorNearField(FraclimError):
    """Lipschitz near-field bounds do not exist for indicator fields.

    Engines catching this flag must switch to exact geometric handling of
    the near-diagonal zone.
    """


class EngineError(FraclimError):
    pass


class EngineNonConvergence(EngineError):
    """Deterministic refinement did not meet tolerance at maximum depth."""


class EngineUnsupported(EngineError):
    pass
