"""Exception hierarchy shared across the package."""


class GraphtensionError(Exception):
    """Base class for all errors raised by graphtension."""


class InputError(GraphtensionError, ValueError):
    """Malformed or out-of-range user input."""


class EdgeListParseError(InputError):
    """An edge-list or partition file line could not be parsed."""

    def __init__(self, line_no, line, reason="expected two integer node ids"):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {reason}: {line!r}")


class ConfigError(GraphtensionError, ValueError):
    """A solver or generator configuration is infeasible."""


class DegenerateInputError(GraphtensionError, ValueError):
    """The input carries no information the method can work with."""


class ConvergenceError(GraphtensionError, RuntimeError):
    """An iterative method hit its iteration cap before converging."""

    def __init__(self, message, best_residual=float("nan")):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3e})")


class UndefinedScoreError(GraphtensionError, ZeroDivisionError):
    """The relative-energy score is undefined because the reference energy is 0."""
