"""Exception hierarchy.

Input-contract violations derive from :class:`ValueError`; failures of a
numerical procedure on valid input derive from :class:`NumericalFailure`.
"""

from __future__ import annotations


class LorentzQMError(Exception):
    """Base class for all library errors."""


class MetricMismatchError(LorentzQMError, ValueError):
    pass


class DimensionMismatchError(LorentzQMError, ValueError):
    pass


class NormalizationError(LorentzQMError, ValueError):
    """A Lorentz map or boost failed its defining identity."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class NonHermitianError(LorentzQMError, ValueError):
    pass


class SpectrumError(LorentzQMError, ValueError):
    """Operation needs a stable, non-degenerate spectrum and did not get one."""


class ConeCrossingError(LorentzQMError, ValueError):
    """A parameter path touches or enters the degeneracy cone."""


class NumericalFailure(LorentzQMError, ArithmeticError):
    pass


class PropagatorOverflowError(NumericalFailure, OverflowError):
    """Amplitudes of an unstable evolution exceed double precision range.

    ``growth_exponent`` is max|Im E|*|t|.  When raised from a trajectory
    computation, ``trace`` holds the part computed before the overflow.
    """

    def __init__(self, message: str, growth_exponent: float, trace=None):
        super().__init__(message)
        self.growth_exponent = growth_exponent
        self.trace = trace


class StepControlError(NumericalFailure):
    pass


class BandTrackingError(NumericalFailure):
    pass
