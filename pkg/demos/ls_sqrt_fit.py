"""Least-squares fit of sqrt(x) on (0, 1) with a free-knot ReLU network.

The target has an unbounded derivative at 0, so a uniform mesh is a poor
choice: the breakpoints should crowd towards the origin.  This script trains
the same initial network with damped block Newton (dBN) and with the BFGS
baseline and prints where the breakpoints end up.

    python3 demos/ls_sqrt_fit.py
"""
import numpy as np

from dbn1d import SolverConfig, initial_net, make_uniform, run_bfgs_baseline, run_dbn
from dbn1d import models
from dbn1d.problems import get_problem

prob = get_problem("ls_sqrt")

for n in (24, 48):
    net0 = initial_net(prob, make_uniform(n, anchor="left"))
    print(f"n = {n}: initial loss {models.loss(net0, prob):.3e}")

    dbn = run_dbn(prob, net0, SolverConfig(max_iters=1000, record_error=False))
    bfgs = run_bfgs_baseline(prob, net0, SolverConfig(max_iters=1000, method="bfgs",
                                                      record_error=False))
    print(f"  dBN   {dbn.final.iter:5d} iters  J = {dbn.final.J:.3e}  ({dbn.status})")
    print(f"  BFGS  {bfgs.final.iter:5d} iters  J = {bfgs.final.J:.3e}  ({bfgs.status})")

    # BFGS stops on its gradient test long before the iteration budget
    b = dbn.net.p.b
    print(f"  dBN breakpoints below 0.01: {np.sum(b < 0.01)} of {n}")
    print("  first five:", np.array2string(b[:5], precision=2))
