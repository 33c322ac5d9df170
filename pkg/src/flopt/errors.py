"""Exception hierarchy shared by every solver component."""


class FLError(Exception):
    """Base class for all solver errors.

    ``kind`` is the short name used in stop reasons (``Error(kind)``).
    """

    @property
    def kind(self):
        return type(self).__name__


class NotPositiveDefinite(FLError):
    """A matrix that must be SPD (gram matrix, Hessian) failed factorization."""


class NonFiniteEvaluation(FLError):
    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"non-finite value in {field}")


class NonFiniteState(FLError):
    """An integrator update produced a non-finite or exploding iterate."""


class HessianUnavailable(FLError):
    pass


class MetricNotIdentity(FLError):
    pass


class Unbounded(FLError):
    """The nonnegative QP has no finite minimizer."""


class MaxIterations(FLError):
    pass


class NoFeasibleCandidate(FLError):
    pass


class ZeroDiagonal(FLError):
    pass


class SingularKktMatrix(FLError):
    pass


class Infeasible(FLError):
    """The linearized inequality subproblem has no feasible point."""


class TooManyConstraints(FLError):
    pass


class DimensionMismatch(FLError, ValueError):
    pass
