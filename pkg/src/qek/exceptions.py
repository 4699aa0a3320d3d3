"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Requested register size exceeds what the dense simulator supports."""


class MitigationInfeasible(ValueError):
    """Survival probability cannot be inferred from the measured diagonal.

    Raised when a diagonal entry used for the estimate lies at or below the
    fully mixed value ``2**-N`` (imaginary survival probability) or above
    one (survival probability larger than one).
    """


class IndefiniteKernel(ValueError):
    """Kernel matrix handed to the SVM has a clearly negative eigenvalue."""


class NonConvergence(RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class TrainingError(RuntimeError):
    """Alignment training hit a non-finite objective."""


class Undecided(RuntimeError):
    """Ensemble vote stayed within the resampling margin for every retry."""
