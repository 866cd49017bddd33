"""Exception types shared across the toolkit."""


class StackgradError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(StackgradError):
    """Array shapes do not line up with the declared game dimensions."""


class InfeasibleSpace(StackgradError):
    """The polyhedron {Ax=b, Gx<=h} has no feasible point."""


class NonConvergence(StackgradError):
    """An iterative solver exhausted its iteration budget."""


class DualRecoveryFailure(StackgradError):
    """Stationarity residual after dual recovery exceeds the tolerance.

    Carries the best-effort duals so callers may regularize instead of
    aborting.
    """

    def __init__(self, message, duals_ineq=None, duals_eq=None, residual=None):
        super().__init__(message)
        self.duals_ineq = duals_ineq
        self.duals_eq = duals_eq
        self.residual = residual


class SingularSystem(StackgradError):
    """The KKT matrix could not be solved even after regularization."""


class BranchJump(StackgradError):
    """A finite-difference probe left the equilibrium branch; the FD oracle
    is invalid at this point (not a solver bug)."""


class EmptyEquilibriumSet(StackgradError):
    """Selection rule applied to an empty list of equilibria."""


class UnknownKind(StackgradError):
    """Unrecognized game domain identifier."""


class ConfigError(StackgradError):
    """Config file parse or validation failure (message is line-precise)."""
