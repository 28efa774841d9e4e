"""Exception hierarchy.

Validation-type errors map to CLI exit code 1, numerical failures to exit 2.
"""

from __future__ import annotations


class NeflabError(Exception):
    exit_code = 1


class InvalidArgument(NeflabError, ValueError):
    pass


class NotFound(NeflabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class ParseError(NeflabError):
    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")


class ValidationError(NeflabError):
    pass


class NumericalError(NeflabError):
    exit_code = 2


class ConvergenceFailure(NumericalError):
    def __init__(self, message, best=None, residual=float("nan")):
        self.best = best
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class DomainEscape(NumericalError):
    pass


class SingularityError(NumericalError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class NonNormalizable(NumericalError):
    pass


class DegenerateGrid(NumericalError):
    pass


class EmptyDomainWarning(UserWarning):
    pass
