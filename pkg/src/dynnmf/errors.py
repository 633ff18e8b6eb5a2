"""Exception types shared across the package."""


class DynnmfError(Exception):
    """Base class for all package-specific errors."""


class ZeroColumn(DynnmfError):
    """A factor column sums to zero and cannot be normalized."""


class NotAdmissible(DynnmfError):
    """A Q-transform leaves the nonnegative cone."""


class SingularQ(DynnmfError):
    """The Q-transform matrix is numerically singular."""


class WrongRank(DynnmfError):
    """An operation restricted to a specific K received another rank."""


class NonStationary(DynnmfError):
    """The contagion matrix has spectral radius >= 1."""


class DomainError(DynnmfError):
    """An observation has zero probability under the requested parameter."""


class UnsupportedFamily(DynnmfError):
    """The requested operation is not defined for this model family."""


class NonConvergence(DynnmfError):
    """An iterative solver exhausted its budget without converging."""


class InnerSolverFailure(DynnmfError):
    """A block subproblem could not make an ascent step."""


class IterationLimit(DynnmfError):
    """A constrained optimizer hit its iteration cap."""


class Infeasible(DynnmfError):
    """No admissible point was found."""


class BoundaryBenchmark(DynnmfError):
    """The criterion optimizer sits on the admissibility boundary."""


class SingularBordered(DynnmfError):
    """The bordered information matrix is not invertible."""


class TooFewValidDraws(DynnmfError):
    """Nearly all simulation draws violated nonnegativity."""


class InputError(DynnmfError):
    """Malformed user input (files, config); maps to exit code 2."""
