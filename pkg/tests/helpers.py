"""Shared oracles and random instances for the test suite."""
import numpy as np

from dbn1d.models import DRProblem, LSProblem, ShallowReLUNet
from dbn1d.partition import Partition
from dbn1d.quadrature import ScalarField


def random_partition(rng, n, x_lo=0.0, x_hi=1.0, spread=0.9):
    """Breakpoints with gaps drawn from U(1 - spread, 1) and rescaled.

    Gap ratios stay below ``1 / (1 - spread)``, which keeps the mass matrix
    condition number within reach of a dense solve.
    """
    h = rng.uniform(1.0 - spread, 1.0, n + 1)
    h *= (x_hi - x_lo) / h.sum()
    return Partition(x_lo + np.cumsum(h)[:-1], x_lo, x_hi)


def random_poly_field(rng, positive=True):
    """Quadratic ``w0 + w1 x + w2 x^2`` with its derivative; integrated exactly by Gauss-5."""
    w0 = rng.uniform(1.0, 2.0)
    w1, w2 = rng.uniform(-0.5, 0.5, 2) if positive else rng.uniform(-2.0, 2.0, 2)
    return ScalarField(lambda x: w0 + w1 * x + w2 * x * x, lambda x: w1 + 2.0 * w2 * x)


def smooth_ls(rng):
    k = rng.uniform(1.0, 4.0)
    return LSProblem(f=ScalarField(lambda x: np.sin(k * x) + x, lambda x: k * np.cos(k * x) + 1.0),
                     r=random_poly_field(rng))


def smooth_dr(rng, gamma=10.0):
    k = rng.uniform(1.0, 4.0)
    return DRProblem(a=random_poly_field(rng), r=random_poly_field(rng),
                     f=ScalarField(lambda x: np.cos(k * x)), alpha_bc=rng.uniform(-1, 1),
                     beta_bc=rng.uniform(-1, 1), gamma=gamma)


def random_net(rng, prob, p, c=None):
    if c is None:
        c = rng.standard_normal(p.n)
    return ShallowReLUNet(prob.c0, c, p)


def central_fd(fun, x, step):
    """Central differences of a scalar or vector function, one column per coordinate."""
    cols = []
    for e in np.eye(x.size):
        cols.append((np.asarray(fun(x + step * e)) - np.asarray(fun(x - step * e))) / (2 * step))
    return np.array(cols)


def backward_error(M, y, x):
    """Normwise backward error of ``y`` as a solution of ``M y = x``."""
    return np.linalg.norm(M @ y - x) / (np.linalg.norm(M, 2) * np.linalg.norm(y) + np.linalg.norm(x))


def dense_mass_exact(b, x_hi=1.0):
    """Closed-form ReLU mass matrix for r = 1."""
    hi = np.maximum.outer(b, b)
    lo = np.minimum.outer(b, b)
    return (x_hi - hi) ** 3 / 3.0 + (hi - lo) * (x_hi - hi) ** 2 / 2.0
