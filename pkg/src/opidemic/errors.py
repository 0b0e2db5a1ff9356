"""Exception taxonomy shared across the package.

Configuration problems exit the CLI with code 2, numeric failures with
code 3; everything else is a plain bug.
"""


class OpidemicError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(OpidemicError):
    """A parameter or config file is outside its documented domain."""


class DomainError(OpidemicError):
    """An operation was evaluated outside its mathematical domain."""


class DegenerateEquilibriumError(DomainError):
    """The requested closed-form equilibrium degenerates to a Dirac mass."""


class NumericsError(OpidemicError):
    """A solver produced non-finite values or an unsolvable system."""


class CflViolationError(NumericsError):
    """A step produced negative densities beyond tolerance."""
