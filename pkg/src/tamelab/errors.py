"""Exception types shared across tamelab."""


class TamelabError(Exception):
    """Base class for all tamelab errors."""


class DomainError(TamelabError):
    """A domain inclusion or containment requirement failed."""


class ResolutionError(TamelabError):
    """The grid is too coarse for the requested operation."""


class ThresholdError(TamelabError):
    """A smallness threshold (C^1-type bound) was violated."""


class InversionError(TamelabError):
    """Newton inversion of a near-identity map failed to converge."""


class EscapeError(TamelabError):
    """A flow trajectory left the allowed domain."""


class IncompatibleError(TamelabError):
    """The diffeomorphism does not act on the section (transversality failed)."""


class QuadratureError(TamelabError):
    """Singular quadrature failed near the kernel singularity."""


class DimensionError(TamelabError):
    """Operands live on spaces of different dimensions."""


class DegreeError(TamelabError):
    """Cochain degree outside the implemented range."""


class NotAFixedPointError(TamelabError):
    """The given point is not a fixed point of the system."""


class NotClosedError(TamelabError):
    """The form is not closed, so no primitive exists."""


class NeighborhoodError(TamelabError):
    """Input lies outside the admissibility neighborhood of the solver."""


class DivergenceError(TamelabError):
    """The iteration failed to converge; diagnostics attached."""

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class DegenerateError(TamelabError):
    """Spectrum (or commuting family) is degenerate; classification refused."""


class SingularError(TamelabError):
    """A matrix that must be invertible is singular."""


class NonVanishingH2Error(TamelabError):
    """Second cohomology is nonzero; homotopy operators do not exist."""

    def __init__(self, message, betti=None):
        super().__init__(message)
        self.betti = betti


class ScheduleError(TamelabError):
    """The constants schedule is inadmissible (ineq. c^nu * t_nu^-mu >= 1)."""


class StepError(TamelabError):
    """An iteration step violated its flow/action thresholds."""
