"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: usage errors exit 2 (argparse), config
errors exit 3, numeric/convergence errors exit 4, acceptance failures exit 5.
"""


class WhittakerLabError(Exception):
    """Base class for all package errors."""


class DomainError(WhittakerLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OverflowEvalError(WhittakerLabError, OverflowError):
    """A value is too large to represent in double precision."""


class PrecisionError(WhittakerLabError):
    """The requested evaluation would lose too much precision (documented cutoffs)."""


class ConvergenceError(WhittakerLabError, RuntimeError):
    """An iterative scheme or quadrature did not converge.

    Carries the best available estimate so callers can degrade gracefully.
    """

    def __init__(self, message, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class ValidationError(WhittakerLabError, ValueError):
    """A candidate simple system violates one of the defining axioms."""

    def __init__(self, message, axiom=None):
        super().__init__(message)
        self.axiom = axiom


class ResonanceError(WhittakerLabError, ValueError):
    """The spectral parameter is resonant: (lam,lam) + 2(lam,nu) ~ 0 for a lattice point."""

    def __init__(self, message, lattice_point=None):
        super().__init__(message)
        self.lattice_point = lattice_point


class ParameterError(WhittakerLabError, ValueError):
    """The spectral parameter lies outside the admissible set for this route."""


class StepSizeError(WhittakerLabError, RuntimeError):
    """SDE drift exceeded the stability threshold; a smaller dt is required."""


class TailToleranceError(WhittakerLabError, RuntimeError):
    """Horizon-truncation tail bound exceeded the configured tolerance."""

    def __init__(self, message, tail_bound=None, estimate=None):
        super().__init__(message)
        self.tail_bound = tail_bound
        self.estimate = estimate


class UnsupportedModelError(WhittakerLabError, NotImplementedError):
    """The requested operation is only available for specific model presets."""


class ArgumentOrderError(WhittakerLabError, ValueError):
    """Kernel arguments were passed in the wrong order (formulas assume x <= y)."""
