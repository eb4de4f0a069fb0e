"""
Error Types
Exception hierarchy shared by the library and the command-line front end.

Every class carries the process exit code the CLI reports when the error
escapes a subcommand: 2 for configuration problems, 3 for designs that turn
out infeasible, 4 for numerical failures.
"""


class DpcError(Exception):
    """Base class of all errors raised by the package."""

    exit_code = 4


class ConfigError(DpcError, ValueError):
    """Invalid, incomplete or inconsistent experiment configuration."""

    exit_code = 2


class DimensionError(DpcError, ValueError):
    """Array shapes or lengths do not match what an operation needs."""

    exit_code = 2


class BundleMismatchError(ConfigError):
    """An offline bundle was produced from a different configuration."""


class InfeasibleDesignError(DpcError):
    """The offline design has no solution for the given data and bounds."""

    exit_code = 3


class EmptySetError(InfeasibleDesignError):
    """A set that must be nonempty turned out empty."""


class PriorKnowledgeError(EmptySetError):
    """Prior model knowledge contradicts the recorded data."""


class SynthesisError(InfeasibleDesignError):
    """A gain, weight or certificate could not be synthesized."""


class InfeasibleStartError(InfeasibleDesignError):
    """The initial extended state lies outside the feasible region."""


class NumericalError(DpcError):
    """A numerical procedure failed or produced untrustworthy output."""

    exit_code = 4


class RankDeficiencyError(NumericalError):
    """A data matrix that must have full row rank does not."""


class ExcitationError(NumericalError):
    """Data are not persistently exciting enough for the requested use."""


class GeometryError(NumericalError):
    """A polytope operation received an argument it cannot handle."""


class UnboundedSetError(GeometryError):
    """A set that must be bounded is unbounded."""


class ProjectionLimitError(GeometryError):
    """Fourier-Motzkin elimination exceeded the configured row cap."""


class SampleDeficitError(NumericalError):
    """Fewer samples were supplied than a sample-complexity bound requires."""
