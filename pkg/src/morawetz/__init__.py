"""Numerical checks for a smoothed Morawetz estimate on Schwarzschild-type backgrounds.

Submodules
----------
geometry    background models, tortoise map, potentials V, V_L, f
multiplier  the arctan weight g and the change of variables x(rho)
spectral    shooting solution of A psi = 0, asymptotic matching, eigenvalue oracle
hardy       discrete smooth-Hardy constant and randomized verification
simulate    leapfrog evolution of the mode-reduced wave equation with multiplier bookkeeping
cli         command-line entry point
"""

from .geometry import Schwarzschild, WarpedProduct, areal_radius, rho_of_r, sample_potentials
from .multiplier import CustomMultiplier, MultiplierG, eval_g, rho_of_x, x_of_rho
from .spectral import SpectralProblem, shoot, verify_condition11

__all__ = [
    "Schwarzschild",
    "WarpedProduct",
    "areal_radius",
    "rho_of_r",
    "sample_potentials",
    "MultiplierG",
    "CustomMultiplier",
    "eval_g",
    "x_of_rho",
    "rho_of_x",
    "SpectralProblem",
    "shoot",
    "verify_condition11",
]

__version__ = "0.1.0"
