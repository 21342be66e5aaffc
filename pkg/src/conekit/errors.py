"""Exception hierarchy shared by all conekit modules."""


class ConekitError(Exception):
    """Base class for every error raised by conekit."""


class PolytopeError(ConekitError, ValueError):
    """Invalid polytope data: non-primitive normal, unbounded, degenerate, ..."""


class QuadratureNotConverged(ConekitError, ArithmeticError):
    pass


class DomainViolation(ConekitError, ValueError):
    """An affine argument leaves the admissible range ``0 < 1 + a*l < 2``."""

    def __init__(self, message, vertex=None, value=None):
        super().__init__(message)
        self.vertex = vertex
        self.value = value


class NonNormalizedInput(ConekitError, ValueError):
    pass


class ReebPositivityViolation(ConekitError, ValueError):
    pass


class SolverError(ConekitError, ArithmeticError):
    """Base class for numerical failures of the Newton / continuation machinery."""


class NewtonDiverged(SolverError):
    pass


class HessianSingular(SolverError):
    pass


class BSolveDiverged(SolverError):
    pass


class BranchLost(SolverError):
    """The corrector converged to a critical point off the concave branch."""


class ContinuationStalled(SolverError):
    def __init__(self, message, last_good=None, path=None):
        super().__init__(message)
        self.last_good = last_good
        self.path = path


class FDStepUnderflow(SolverError):
    pass
