"""Exception and warning types shared across the package."""


class VarsphereError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(VarsphereError):
    """Invalid input data, configuration, or arguments."""


class NumericalError(VarsphereError):
    """A computation failed or left its tolerated numerical range."""


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped before reaching its target tolerance."""
