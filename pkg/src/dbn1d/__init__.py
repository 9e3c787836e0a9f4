"""Shallow ReLU networks in 1D trained by damped block Newton iterations.

The package fits free-knot linear splines to data (least squares) and to
diffusion-reaction boundary-value problems (penalised Ritz energy).  Every
linear solve on the iteration path costs O(n) thanks to tridiagonal
factorizations of the ReLU mass and stiffness matrices.
"""
from .partition import AffineMap, Partition, PartitionError, make_uniform, project_ordered
from .quadrature import PanelQuadrature, ScalarField, constant, gauss_legendre
from .models import DRProblem, LSProblem, ShallowReLUNet, to_unit_problem
from .solvers import SolverConfig, IterTrace, initial_net, run_dbn, run_dbgn, run_bfgs_baseline

__version__ = "0.1.0"
