"""Adaptive dBN: grow the network where a recovered-flux indicator is large.

Start from 20 neurons, train until the loss stalls, mark subintervals whose
indicator exceeds the average, insert a breakpoint at their midpoints with a
zero weight (the network function does not change), and repeat until the
relative estimate drops below 5%.  The rate r in e_n = C n^-r is compared
with a fixed uniform-start network of the same final size.

    python3 demos/adaptive_bump.py        # takes about half a minute
"""
from dbn1d import SolverConfig, initial_net, make_uniform, run_dbn
from dbn1d.adaptivity import AdaptiveConfig, convergence_rate, run_adbn
from dbn1d.problems import get_problem
from dbn1d.solvers import error_metric

prob = get_problem("dr_exp_bump")
tr = run_adbn(prob, initial_net(prob, make_uniform(20, anchor="left")), SolverConfig(),
              acfg=AdaptiveConfig(eps_stop=0.05))

print("   n      e_n     estimate     r")
for row in tr.events:
    print(f"{row.n:4d}  {row.e_n:.4f}   {row.xi_n:.4f}    {row.r:.3f}")
print("status:", tr.status)

n = tr.events[-1].n
fixed = run_dbn(prob, initial_net(prob, make_uniform(n, anchor="left")),
                SolverConfig(max_iters=500, record_error=False))
e = error_metric(fixed.net, prob)
print(f"fixed n = {n}: e_n = {e:.4f}, r = {convergence_rate(e, n):.3f}")
