"""Exception hierarchy shared across the package."""


class PorofemError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(PorofemError, ValueError):
    """Raised for inconsistent geometry, discretization, or material input.

    ``errors`` carries every problem found, not just the first one.
    """

    def __init__(self, message, errors=None):
        self.errors = list(errors) if errors else [message]
        super().__init__(message if errors is None else "; ".join(self.errors))


class InvalidRequestError(PorofemError, ValueError):
    """An output was requested for data that the run did not produce."""


class DegenerateElementError(PorofemError):
    def __init__(self, element, det):
        self.element = element
        self.det = det
        super().__init__(f"element {element} has non-positive Jacobian determinant {det:g}")


class SolverError(PorofemError):
    """Linear solve failed (singular or inaccurate factorization)."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        super().__init__(message)


class NonconvergenceError(PorofemError):
    """Newton iteration hit its iteration cap."""

    def __init__(self, message, history=(), step=None, time=None):
        self.history = list(history)
        self.step = step
        self.time = time
        super().__init__(message)


class DivergedStateError(PorofemError):
    """A constitutive evaluation produced a non-finite value."""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message)
