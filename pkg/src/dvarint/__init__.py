"""Difference-discrete variational integrators and their structure-preservation checks."""

from .lattice import Grid1D, Grid2D, LatticeForm, NodeFunction
from .mechanics import (
    DiscreteLagrangian,
    HamiltonianSystem,
    Trajectory,
    canonical_step,
    del_step,
    fourth_order_step,
    integrate,
    midpoint_step,
    symplectic_area,
)
from .fieldtheory import HamiltonianPDESystem, DiscreteFieldLagrangian, DiscreteFieldHamiltonian, box_step_row
from .models import ModelSpec, make_field, make_mechanics
from .series import ResidualSeries
from .solvers import ConvergenceError, SingularSystemError, SolverSettings

__version__ = "0.1.0"
