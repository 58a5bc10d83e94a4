"""Numerical laboratory for the anomalous gyromagnetic factor of a
cutoff neutral-current model.

The package computes the regularized magnetic response of a massive
fermion coupled to a heavy neutral boson with a smooth dyadic momentum
cutoff, checks the leading-order closed form, and mechanizes the
scaling bookkeeping (cutoff-removal rates, running-coupling envelopes,
power-counting exponents, symmetry cancellations) at desk scale.
"""

from .errors import (
    DomainError,
    EnumerationLimitError,
    NumericError,
    QuadratureError,
)

__all__ = [
    "DomainError",
    "EnumerationLimitError",
    "NumericError",
    "QuadratureError",
]

__version__ = "0.1.0"
