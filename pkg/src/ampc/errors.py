"""Exception hierarchy shared by all modules."""


class AmpcError(Exception):
    """Base class for all errors raised by the package."""


class InputError(AmpcError, ValueError):
    """An argument is outside the domain an operation accepts."""


class CapacityError(AmpcError, OverflowError):
    """A requested index set is too large to enumerate."""


class DegenerateDesignError(AmpcError):
    """A least-squares design does not have full column rank."""

    def __init__(self, message, rank=None, n_columns=None):
        super().__init__(message)
        self.rank = rank
        self.n_columns = n_columns


class NumericalError(AmpcError):
    """A numerical solve failed or produced an unusable result."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ForwardModelError(AmpcError):
    """A forward-model evaluation failed at a specific parameter point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class AbsoluteContinuityError(AmpcError):
    """The approximating density puts mass where the reference has none."""


class RefinementError(AmpcError):
    """A surrogate refinement inside the adaptive sampler failed."""

    def __init__(self, message, event=None):
        super().__init__(message)
        self.event = event


class ConfigError(InputError):
    """A run configuration failed schema validation or cannot be resolved."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
