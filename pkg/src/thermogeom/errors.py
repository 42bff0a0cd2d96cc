"""Exception types shared across the toolkit."""


class ThermoGeomError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ThermoGeomError):
    """Invalid input data, configuration, or a violated type invariant."""


class NumericalDomainError(ThermoGeomError):
    """A computation left its numerical domain (boundary, overflow, degeneracy)."""


class EigenSolverError(NumericalDomainError):
    """Eigen-solver failed to converge."""

    def __init__(self, dim: int, condition_estimate: float):
        super().__init__(
            f"eigensolver did not converge (dim={dim}, "
            f"condition estimate ~{condition_estimate:.3e})"
        )
        self.dim = dim
        self.condition_estimate = condition_estimate


class MatrixDomainError(NumericalDomainError):
    """Spectral function evaluated outside its domain."""

    def __init__(self, func: str, eigenvalue: float):
        super().__init__(
            f"matrix function {func!r} undefined at eigenvalue {eigenvalue:.6e}"
        )
        self.func = func
        self.eigenvalue = eigenvalue


class NearSingularError(NumericalDomainError):
    """Lyapunov solve too close to the state-space boundary."""


class ParameterRangeError(NumericalDomainError):
    """Intensive parameter outside the overflow guard."""


class NumericalConsistencyError(NumericalDomainError):
    """A quantity that must be nonnegative/monotone by construction is not."""


class DegenerateMetricError(NumericalDomainError):
    """|g_S| below threshold; connection coefficients undefined."""


class SignatureError(NumericalDomainError):
    """Vertical metric restriction is not positive-definite where it must be."""


class ExprSyntaxError(ValidationError):
    """Expression text failed to parse; carries the character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ExprNameError(ValidationError):
    """Unknown identifier in an expression."""


class ExprArityError(ValidationError):
    """Function called with the wrong number of arguments."""


class ExprDomainError(NumericalDomainError):
    """Expression evaluation hit a domain violation (names node and operand)."""
