"""Squashed light: in-loop quadrature spectra, a stochastic feedback-loop
simulator, and the decay of a two-level atom coupled to squeezed or squashed
light."""

from .errors import NumericalError, SquashlabError, ValidationError
from .params import (
    BathParams,
    BlochRates,
    BlochState,
    DetectorChannel,
    FeedbackConfig,
    SqueezedInput,
    theta_from_efficiency,
)

__version__ = "0.1.0"
