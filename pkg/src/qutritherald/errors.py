"""Exception types shared across the package."""


class QutritHeraldError(Exception):
    """Base class for all package errors."""


class PreconditionError(QutritHeraldError, ValueError):
    """An argument violates a documented precondition."""


class CompositionError(QutritHeraldError, ValueError):
    """Kets live on incompatible spaces (overlapping or mismatched subsystems)."""


class DegenerateStateError(QutritHeraldError, ValueError):
    """A state has (numerically) zero norm where a physical state is required."""


class DomainError(QutritHeraldError, ValueError):
    """Inputs lie outside the regime where a closed form is defined."""


class EncodingLeakError(DomainError):
    """Atomic state has weight outside the symmetric qutrit subspace."""


class AccuracyError(QutritHeraldError, RuntimeError):
    """A fixed-step integrator drifted beyond its accuracy guard."""
