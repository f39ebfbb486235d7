"""Exception hierarchy shared by all modules."""


class SpectraError(Exception):
    pass


class InputError(SpectraError, ValueError):
    """Invalid arguments or configuration (CLI exit status 1)."""


class NumericalError(SpectraError, ArithmeticError):
    """A discretization certificate or convergence check failed (CLI exit status 2)."""
