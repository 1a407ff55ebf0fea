"""Exception hierarchy shared by every eigenbound module.

Two families matter to callers: ``ProblemError`` and ``MeshError`` mean the
input was rejected before any numerics ran (the CLI exits with 2), while
``SolverError`` means a computation on valid input failed (the CLI exits with 1).
"""


class EigenboundError(Exception):
    """Base class for all errors raised by eigenbound."""


# ---------------------------------------------------------------------------
# Invalid input
# ---------------------------------------------------------------------------

class ProblemError(EigenboundError, ValueError):
    """A model problem or its configuration violates an invariant."""


class NonPositiveDiameter(ProblemError):
    pass


class DimensionBelowOne(ProblemError):
    pass


class ExponentNotAboveOne(ProblemError):
    pass


class DiameterExceedsMyersRange(ProblemError):
    pass


class ExponentOutOfSupportedRange(ProblemError):
    pass


class MissingCurvatureData(ProblemError):
    pass


class ConfigError(ProblemError):
    pass


class MeshError(EigenboundError, ValueError):
    """A mesh or graph failed structural validation."""


class ParseError(MeshError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonManifoldMesh(MeshError):
    pass


class DisconnectedMesh(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


# ---------------------------------------------------------------------------
# Numerical failures
# ---------------------------------------------------------------------------

class SolverError(EigenboundError, RuntimeError):
    """A solver could not produce a trustworthy result for valid input."""


class BracketNotFound(SolverError):
    pass


class NearSingularWeight(SolverError):
    pass


class GridTooCoarse(SolverError):
    pass


class MethodDisagreement(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, message: str, residual: float | None = None) -> None:
        self.residual = residual
        super().__init__(message)


class ModelTooShort(SolverError):
    pass
