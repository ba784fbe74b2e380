"""Numerical laboratory for two-player zero-sum stochastic differential games.

Subpackages by role:

* :mod:`gamelab.coeffs` -- scenario registry, action sets, control laws.
* :mod:`gamelab.hamiltonian` -- minimax Hamiltonians, saddle points, constrained generators.
* :mod:`gamelab.sde_sim` -- Euler simulation of controlled diffusions, Girsanov reweighting.
* :mod:`gamelab.lattice_dpp` -- minimax dynamic programming on state lattices.
* :mod:`gamelab.pde_solver` -- monotone finite differences for the minimax PDEs.
* :mod:`gamelab.bsde_solver` -- regression Monte Carlo for backward SDEs.
* :mod:`gamelab.cli` -- the ``game-lab`` command line front end.
"""

from . import errors
from .coeffs import load_scenario, load_scenario_file, registry_names

__all__ = ["errors", "load_scenario", "load_scenario_file", "registry_names"]
__version__ = "0.1.0"
