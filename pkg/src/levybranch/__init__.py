"""Branching particle systems coded by spectrally one-sided Levy paths."""
from .errors import *  # noqa: F401,F403
from .levy_model import LevyModel, Orientation, laplace_exponent, mean_jump, phi, scale_W, tilt
from .measures import DiscreteJumps, ExponentialJumps, TabulatedJumps
from .offspring import OffspringLaw
from .testfunctions import CappedLinear, Constant, FunctionOf, Indicator

__version__ = "0.1.0"
