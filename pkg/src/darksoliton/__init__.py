"""Numerical laboratory for dark solitons of the 1D Gross-Pitaevskii equation."""

from .errors import (DegenerateModulationError, DomainError, GuardError, IntegrationError,
                     LiftingError, ModulationError, NoSolitonError, TrackingLossError)
from .grid import Grid, Pair
from .soliton import SolitonParams, SolitonProfile, conserved_closed, eval_hydro, eval_wave

__version__ = "0.1.0"
