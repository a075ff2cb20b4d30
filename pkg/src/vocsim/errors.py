"""Exception types shared across the toolkit."""


class VocsimError(Exception):
    """Base class for all toolkit errors."""


class NetworkSolveError(VocsimError):
    """The electrical network matrix is singular or a solve failed."""


class OscillatorCollapseError(VocsimError):
    """Oscillator voltage magnitude fell below the floor; phase dynamics ill-posed."""


class InfeasibleDesignError(VocsimError):
    """The requested ac-performance specification admits no parameter set."""

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = tuple(binding) if binding else ()


class InfeasibleSetpointError(VocsimError):
    """A power set-point violates the security constraint (no real gains exist)."""


class SolverConvergenceError(VocsimError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SimulationAbort(VocsimError):
    """A simulation produced NaN or a collapsed state; carries the abort time."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
