"""Exception hierarchy shared by all modules."""


class InvPDeltaError(Exception):
    """Base class for library errors."""


class MeshError(InvPDeltaError):
    """Invalid mesh functions or a tangled lattice."""


class BoundaryError(InvPDeltaError):
    """Stencil requested too close to the lattice edge."""


class DomainError(InvPDeltaError):
    """Evaluation outside the domain of a formula (zero step, zero u, singular map)."""


class NumericError(InvPDeltaError):
    """Floating point failure or disagreement between independent estimators."""


class SingularUpdateError(NumericError):
    """Explicit update whose coefficient of the unknown vanishes."""


class SolverError(NumericError):
    """Newton iteration failed or the Jacobian was singular."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class SamplingError(InvPDeltaError):
    """Random stencil samples gave inconsistent results."""


class ConfigError(InvPDeltaError):
    """Bad configuration or unknown name."""
