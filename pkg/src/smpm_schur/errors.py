"""Exception types raised by the solver stack."""


class InvalidOrderError(ValueError):
    """GLL order below 2."""


class MeshError(ValueError):
    """Non-positive element counts or extents."""


class AssemblyError(RuntimeError):
    """A local block could not be factored."""


class PreconditionerError(RuntimeError):
    """A block-Jacobi block is singular."""


class ConvergenceError(RuntimeError):
    """An iteration failed to reach its tolerance.

    ``residual`` carries the last residual seen.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericError(FloatingPointError):
    """NaN or Inf produced by an operator."""


class SingularShiftError(ZeroDivisionError):
    """A shift coincides with an eigenvalue of a factored block."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class OracleGuardError(RuntimeError):
    """Dense oracle requested on a grid that is too large."""
