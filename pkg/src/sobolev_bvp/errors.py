"""Exception hierarchy shared by all modules."""


class BVPError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BVPError, ValueError):
    """Evaluation point outside the grid interval."""


class OrderError(BVPError, ValueError):
    """A derivative stack is too short for the requested operation."""


class StructuralError(BVPError, ValueError):
    """Shapes, grids or group structures do not fit together."""


class StackConsistencyError(BVPError, ValueError):
    """Derivative layers of a grid function do not integrate to each other."""

    def __init__(self, layer, residual, bound):
        self.layer = layer
        self.residual = residual
        self.bound = bound
        super().__init__(
            f"derivative stack inconsistent at layer {layer}: "
            f"residual {residual:.3e} exceeds {bound:.3e}"
        )


class SingularFundamentalMatrixError(BVPError, ArithmeticError):
    """The integrated fundamental matrix lost rank (step too large)."""


class NoUniqueSolutionError(BVPError, ArithmeticError):
    """The characteristic matrix is singular, so the homogeneous problem
    has a nontrivial solution."""

    def __init__(self, message, characteristic=None):
        super().__init__(message)
        self.characteristic = characteristic


class UnsupportedFormError(BVPError, TypeError):
    """Operation requires a different boundary-operator variant."""


class ConfigError(BVPError, ValueError):
    """Invalid experiment configuration; carries every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
