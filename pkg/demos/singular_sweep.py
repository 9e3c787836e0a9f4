"""Singularly perturbed problem: -nu u'' + u = f on (-1, 1) with two layers.

The exact solution has interior layers of width about sqrt(nu) at x = +-1/2.
A uniform network with 32 neurons cannot see them; dBN moves breakpoints
into the layers and the relative energy error drops to under 10% for every
nu from 1e-2 down to 1e-6.

    python3 demos/singular_sweep.py
"""
import numpy as np

from dbn1d import SolverConfig, initial_net, make_uniform, run_dbn, to_unit_problem
from dbn1d.problems import get_problem
from dbn1d.solvers import error_metric

print("   nu       e_n(init)  e_n(200 its)  knots within 0.05 of a layer")
for nu in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
    # solve on (0, 1); the map rescales diffusion and penalty, not the solution
    prob, amap = to_unit_problem(get_problem("dr_singular", nu=nu))
    net0 = initial_net(prob, make_uniform(32, anchor="left"))
    tr = run_dbn(prob, net0, SolverConfig(max_iters=200, record_error=False))
    b = amap.from_unit(tr.net.p.b)
    near = np.sum(np.minimum(np.abs(b - 0.5), np.abs(b + 0.5)) < 0.05)
    print(f"{nu:8.0e}   {error_metric(net0, prob):.4f}     {error_metric(tr.net, prob):.4f}"
          f"        {near}")
