"""Exception hierarchy.

Physics validation failures and resource guards are distinct classes so the
CLI can map them onto separate exit codes.
"""


class BosecountError(Exception):
    """Base class for all package errors."""


class ParameterError(BosecountError, ValueError):
    """A parameter is outside its valid range."""


class PhysicsError(BosecountError):
    """A physical consistency condition is violated."""


class NonHermitianOrNegative(PhysicsError):
    """A detector matrix is not Hermitian positive semidefinite."""


class OverComplete(PhysicsError):
    """The summed detector matrices exceed the identity."""


class DegenerateDetector(PhysicsError):
    """The detector has no interference term (r_ab = 0)."""


class NegligibleEvidence(PhysicsError):
    """The conditioning outcome carries no probability mass.

    ``nearest`` holds the closest count with non-negligible mass, if any.
    """

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class NoPeaks(BosecountError):
    """No local maximum of a distribution clears the mass threshold."""


class BudgetExceeded(BosecountError):
    """Estimated kernel work exceeds the configured ceiling."""


class ConfigError(BosecountError):
    """An experiment configuration cannot be parsed into valid inputs."""


class NumericalError(BosecountError):
    """An internal numerical invariant failed (a bug, not bad input)."""
