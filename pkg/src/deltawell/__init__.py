"""Ionization of a one-dimensional delta well under periodic parametric forcing.

Submodules
----------
forcing
    Periodic zero-mean drives and the shift-genericity checker.
kernel
    The memory kernel M, its Laplace transform and product-integration moments.
volterra
    Time-domain solver for the reduced Volterra equation and its observables.
floquet
    Laplace-space lattice, singularity classification and Bromwich inversion.
nongeneric
    Continued-fraction construction of drives with incomplete ionization.
acceptance
    Numerical acceptance thresholds and the runners that check them.
cli
    Command-line entry point (``python -m deltawell``).
"""

from . import acceptance, floquet, forcing, kernel, nongeneric, volterra
from .forcing import ForcingSpec, build_forcing, eval_eta, genericity_distance, sine_forcing
from .kernel import eval_M, kernel_cell_moments, laplace_M
from .volterra import InitialState, bound_state, simulate, solve_Y

__version__ = "0.1.0"

__all__ = [
    "ForcingSpec",
    "InitialState",
    "acceptance",
    "bound_state",
    "build_forcing",
    "eval_M",
    "eval_eta",
    "floquet",
    "forcing",
    "genericity_distance",
    "kernel",
    "kernel_cell_moments",
    "laplace_M",
    "nongeneric",
    "simulate",
    "sine_forcing",
    "solve_Y",
    "volterra",
]
