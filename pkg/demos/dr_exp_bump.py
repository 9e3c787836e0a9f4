"""Ritz solution of -u'' + u = f on (0, 1) with an exponential bump solution.

The loss is the energy functional plus a penalty for the right boundary
value; the left boundary value is built into the network's bias.  We compare
the initial uniform network with dBN and damped block Gauss-Newton (dBGN).

    python3 demos/dr_exp_bump.py
"""
from dbn1d import SolverConfig, initial_net, make_uniform, run_dbgn, run_dbn
from dbn1d.problems import get_problem
from dbn1d.solvers import error_metric

prob = get_problem("dr_exp_bump")
net0 = initial_net(prob, make_uniform(22, anchor="left"))
print(f"uniform mesh, n = 22: relative energy error {error_metric(net0, prob):.4f}")

cfg = SolverConfig(max_iters=500, record_error=False)
for name, runner in (("dBN", run_dbn), ("dBGN", run_dbgn)):
    tr = runner(prob, net0, cfg)
    print(f"{name:5s} {tr.final.iter:4d} iters  energy {tr.final.J:+.8f}  "
          f"error {error_metric(tr.net, prob):.4f}")

# the energy decreases monotonically along both runs
tr = run_dbn(prob, net0, SolverConfig(max_iters=50))
print("first errors along dBN:", " ".join(f"{r.e_n:.3f}" for r in tr.records[:6]))
