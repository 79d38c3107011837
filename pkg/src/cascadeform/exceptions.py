"""Exception hierarchy.

Domain errors (bad arguments, violated preconditions) derive from
``ValueError`` so generic callers can catch them the usual way; numerical
failures derive from ``ArithmeticError``.
"""


class FormationError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FormationError, ValueError):
    """An argument is outside the operation's domain."""


class TopologyError(DomainError):
    """The interaction graph does not satisfy a required graph condition."""


class ConstructionError(DomainError):
    """Edge weights or a Laplacian cannot be constructed for this input."""


class StructureError(DomainError):
    """A cascade partition violates the roots-only coupling rule."""


class ScenarioError(DomainError):
    """A scenario file failed to parse or validate.

    Parameters
    ----------
    message : str
        Human-readable description.
    path : str, optional
        Dotted/indexed path of the offending field, e.g. ``agents[3].id``.
    line : int, optional
        Line number for syntax errors.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if path:
            where.append(f"at {path}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NumericalError(FormationError, ArithmeticError):
    """An iterative numerical routine failed.

    ``diagnostics`` carries whatever state helps reproduce the failure.
    """

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class SpectralStructureError(NumericalError):
    """A spectrum has the wrong number of structural zero eigenvalues."""


class AssemblyError(NumericalError):
    """The assembled cascade matrix violates its kernel/rank postcondition."""


class DesignFailure(FormationError):
    """The genetic search found no stabilizing diagonal.

    Attributes
    ----------
    best_diagonal : ndarray
        The best (infeasible) candidate, for diagnostics.
    best_fitness : float
    """

    def __init__(self, message, best_diagonal=None, best_fitness=None):
        self.best_diagonal = best_diagonal
        self.best_fitness = best_fitness
        super().__init__(message)


class DivergenceError(NumericalError):
    """The state became non-finite during time stepping."""

    def __init__(self, message, time=None, diagnostics=None):
        self.time = time
        super().__init__(message, diagnostics)
