"""Spectral toolkit for Dirichlet Sturm-Liouville operators -y'' + q y with
distributional potentials q = u', u in W_2^theta, 0 < theta < 1/2."""

__version__ = "0.1.0"

from ._backend import backend_name
from .potentials import AffinePotential, Grid, SineSeries, StepPotential, random_in_ball
from .spectrum import Spectrum, compute_spectrum, find_eigenvalues

__all__ = [
    "AffinePotential",
    "Grid",
    "SineSeries",
    "Spectrum",
    "StepPotential",
    "backend_name",
    "compute_spectrum",
    "find_eigenvalues",
    "random_in_ball",
]
