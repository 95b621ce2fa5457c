"""Ground states, symmetry breaking and dynamics of focusing NLS on R^n x T."""

from .grid import Field, GridSpec, read_field, write_field
from .energy import Params, energy, energy_gradient, lagrange_multiplier
from .profiles import soliton, soliton_1d, omega_of_mass
from .minimize import Init, MinimizeConfig, minimize_J, minimize_K
from .bifurcation import find_lambda_star, find_rho_star, trial_upper_bound
from .evolve import EvolveConfig, orbit_distance, split_step, stability_experiment, strichartz_norms

__all__ = [
    "Field", "GridSpec", "read_field", "write_field",
    "Params", "energy", "energy_gradient", "lagrange_multiplier",
    "soliton", "soliton_1d", "omega_of_mass",
    "Init", "MinimizeConfig", "minimize_J", "minimize_K",
    "find_lambda_star", "find_rho_star", "trial_upper_bound",
    "EvolveConfig", "orbit_distance", "split_step", "stability_experiment", "strichartz_norms",
]
