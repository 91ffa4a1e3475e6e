"""Exception types shared across the package."""


class BadParams(ValueError):
    """Raised when a parameter is outside its admissible range."""


class SingularSystem(ArithmeticError):
    """Raised when a linear solve hits a pivot below tolerance.

    Reachable only at boundary protocol parameters (q or r in {0, 1});
    interior parameters always yield well-conditioned systems.
    """


class ScenarioUnsatisfiable(RuntimeError):
    """Raised when a simulation scenario's preconditions are not met."""
