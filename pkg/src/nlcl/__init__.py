"""Finite-volume simulation and analysis of 1D nonlocal conservation laws
with power-scaled kernels ``gamma_eta = c_eta * gamma**(1/eta)``."""

from .errors import NlclError, NumericalError, ValidationError
from .grid import Datum, Field, Grid, l1_dist, linf, project, tv
from .kernel import DiscreteKernel, KernelSpec, c_eta, discretize, preset, validate
from .local_solver import FluxModel, LocalRunConfig, godunov_flux, riemann_exact, run_local
from .nonlocal_op import SurrogateParams, exp_nonlocal, nonlocal_term, reconstruct_from_exp
from .nonlocal_solver import NonlocalRunConfig, Trajectory, VelocityModel, run

__version__ = "0.1.0"

__all__ = [
    "NlclError", "NumericalError", "ValidationError",
    "Datum", "Field", "Grid", "l1_dist", "linf", "project", "tv",
    "DiscreteKernel", "KernelSpec", "c_eta", "discretize", "preset", "validate",
    "FluxModel", "LocalRunConfig", "godunov_flux", "riemann_exact", "run_local",
    "SurrogateParams", "exp_nonlocal", "nonlocal_term", "reconstruct_from_exp",
    "NonlocalRunConfig", "Trajectory", "VelocityModel", "run",
]
