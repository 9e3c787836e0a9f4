"""Condition numbers of the mass and stiffness matrices on uniform meshes.

In the ReLU basis the mass matrix is very badly conditioned, growing by a
factor near 16 each time n doubles, while the stiffness matrix grows by
about 4.  These are the matrices the structured solvers invert without
ever forming them.

    python3 demos/condition_numbers.py
"""
from dbn1d.experiments import measure_condition

for kind in ("mass", "stiffness"):
    prev = None
    print(kind)
    for n in (4, 8, 16, 32, 64):
        k = measure_condition(kind, n)
        ratio = "" if prev is None else f"  x{k / prev:.2f}"
        print(f"  n = {n:3d}  kappa = {k:.3e}{ratio}")
        prev = k
