"""Least-squares fitting and penalised Ritz diffusion-reaction problems.

Both problems are posed over the shallow ReLU network

    u_n(x) = c0 + sum_i c_i sigma(x - b_i)

with ``c0`` pinned to the left boundary value.  For each problem this module
provides the loss, the exact solve for the output weights ``c`` at fixed
breakpoints, the breakpoint gradient, the structured Hessian and Gauss-Newton
matrix, and relative error norms against a known solution.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    coefficient_matrix,
    hat_loads,
    mass_operator,
    stiffness_operator,
    _dr_integrand,
    _ls_integrand,
)
from .linalg import RankOneUpdate, TriDiagonal, alphabeta_inverse, q_apply, sherman_morrison_solve
from .partition import AffineMap, Partition
from .quadrature import PanelQuadrature, ScalarField, as_field, constant, gauss_legendre

__all__ = [
    "ShallowReLUNet",
    "LSProblem",
    "DRProblem",
    "StructuredHessian",
    "to_unit_problem",
    "ls_loss",
    "ls_solve_linear",
    "ls_grad_b",
    "ls_hessian",
    "dr_energy",
    "dr_solve_linear",
    "dr_grad_b",
    "dr_hessian",
    "gauss_newton_matrix",
    "h1_rel_error",
    "l2_rel_error",
    "solve_linear",
    "loss",
    "grad_b",
    "hessian",
]


@dataclass(frozen=True)
class ShallowReLUNet:
    c0: float
    c: np.ndarray
    p: Partition

    def __post_init__(self):
        c = np.array(self.c, dtype=float).ravel()
        if c.size != self.p.n:
            raise ValueError(f"{c.size} weights for {self.p.n} breakpoints")
        c.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def n(self):
        return self.p.n

    @property
    def slopes(self):
        """Slope ``S_k = c_1 + ... + c_k`` of ``u_n`` on ``I_k``, k = 0..n."""
        return np.concatenate(([0.0], np.cumsum(self.c)))

    @property
    def node_values(self):
        """``u_n`` at ``x_lo, b_1, ..., b_n, x_hi`` by accumulating slope times gap."""
        return self.c0 + np.concatenate(([0.0], np.cumsum(self.slopes * self.p.h)))

    def breakpoint_values(self):
        return self.node_values[1:-1]

    def _locate(self, x):
        k = np.searchsorted(self.p.b, x, side="right")
        return k

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self._locate(x)
        left = self.p.nodes[k]
        return self.node_values[k] + self.slopes[k] * (x - left)

    def derivative(self, x):
        return self.slopes[self._locate(np.asarray(x, dtype=float))]

    def end_value(self):
        return float(self.node_values[-1])

    def with_partition(self, p, c=None):
        return ShallowReLUNet(self.c0, self.c if c is None else c, p)


def _field(v):
    return v if v is None else as_field(v)


@dataclass(frozen=True)
class LSProblem:
    """Minimise ``1/2 int r (v - f)^2`` subject to ``v(x_lo) = f(x_lo)``.

    ``resolution`` lists points where quadrature panels are additionally split.
    """

    f: ScalarField
    r: ScalarField = None
    x_lo: float = 0.0
    x_hi: float = 1.0
    resolution: tuple = ()
    u_exact: ScalarField = None

    def __post_init__(self):
        object.__setattr__(self, "f", as_field(self.f))
        object.__setattr__(self, "r", constant(1.0) if self.r is None else as_field(self.r))
        object.__setattr__(self, "resolution", tuple(np.asarray(self.resolution, dtype=float)))
        object.__setattr__(self, "u_exact", _field(self.u_exact))

    @property
    def c0(self):
        return float(self.f(np.array([self.x_lo]))[0])


@dataclass(frozen=True)
class DRProblem:
    """``-(a u')' + r u = f`` on ``(x_lo, x_hi)``, ``u(x_lo) = alpha``, ``u(x_hi) = beta``.

    The right boundary condition enters through the penalty
    ``gamma/2 (v(x_hi) - beta)^2``.  ``a`` should carry its derivative when it
    is not constant.  ``literal_rhs`` switches the load to ``int (f - alpha) psi``.
    """

    a: ScalarField
    r: ScalarField
    f: ScalarField
    alpha_bc: float = 0.0
    beta_bc: float = 0.0
    gamma: float = 1e4
    x_lo: float = 0.0
    x_hi: float = 1.0
    resolution: tuple = ()
    literal_rhs: bool = False
    u_exact: ScalarField = None
    du_exact: ScalarField = None

    def __post_init__(self):
        for name in ("a", "r", "f"):
            object.__setattr__(self, name, as_field(getattr(self, name)))
        object.__setattr__(self, "u_exact", _field(self.u_exact))
        object.__setattr__(self, "du_exact", _field(self.du_exact))
        object.__setattr__(self, "resolution", tuple(np.asarray(self.resolution, dtype=float)))
        if not self.gamma > 0:
            raise ValueError("penalty gamma must be positive")

    @property
    def c0(self):
        return float(self.alpha_bc)


def to_unit_problem(prob):
    """Map a problem on ``(x_lo, x_hi)`` to ``(0, 1)`` via ``x = x_lo + L t``.

    Diffusion becomes ``a(x)/L^2`` and the penalty ``gamma/L``; reaction, load
    and boundary values are unchanged, so ``u(t) = u(x)`` and both problems
    have the same minimiser.  Returns ``(unit_problem, AffineMap)``.
    Relative H1-seminorm errors are invariant under the map.
    """
    amap = AffineMap(prob.x_lo, prob.x_hi)
    L = amap.length
    if prob.x_lo == 0.0 and prob.x_hi == 1.0:
        return prob, amap

    def pull(fld, scale=1.0, dscale=None):
        if fld is None:
            return None
        if fld.is_constant:
            return constant(fld.constant_value * scale, name=fld.name)
        df = None
        if fld.df is not None:
            ds = scale * L if dscale is None else dscale
            df = lambda t, _g=fld: ds * _g.df(amap.from_unit(t))
        return ScalarField(lambda t, _g=fld: scale * _g(amap.from_unit(t)), df, name=fld.name)

    res = tuple(amap.to_unit(np.asarray(prob.resolution))) if prob.resolution else ()
    if isinstance(prob, DRProblem):
        unit = replace(
            prob,
            a=pull(prob.a, 1.0 / L**2),
            r=pull(prob.r),
            f=pull(prob.f),
            x_lo=0.0,
            x_hi=1.0,
            resolution=res,
            # the energy integral scales by L, the point penalty does not
            gamma=prob.gamma / L,
            u_exact=pull(prob.u_exact),
            # d/dt u(x_lo + L t) = L u'(x)
            du_exact=pull(prob.du_exact, L),
        )
    else:
        unit = replace(prob, f=pull(prob.f), r=pull(prob.r), x_lo=0.0, x_hi=1.0,
                       resolution=res, u_exact=pull(prob.u_exact))
    return unit, amap


def _check_interval(prob, p):
    if p.x_lo != prob.x_lo or p.x_hi != prob.x_hi:
        raise ValueError(f"partition interval ({p.x_lo}, {p.x_hi}) does not match problem "
                         f"({prob.x_lo}, {prob.x_hi})")


def _quad(prob, p, rule=None):
    return PanelQuadrature.for_partition(p, rule or gauss_legendre(), prob.resolution)


@dataclass(frozen=True)
class StructuredHessian:
    """``D(s) D(c) + D(c) A_r D(c) + gamma c c^T`` kept as its parts.

    ``diag_part`` is ``w`` (least squares) or ``g`` (diffusion-reaction) and is
    zero for Gauss-Newton matrices; ``Ar_inv`` is the tridiagonal inverse of the
    coefficient matrix.
    """

    diag_part: np.ndarray
    c: np.ndarray
    Ar_inv: TriDiagonal
    gamma: float = 0.0
    d_rank1: np.ndarray = None
    Ar: object = field(default=None, repr=False)

    def to_dense(self):
        """Dense reconstruction, for tests only."""
        A = self.Ar.to_dense() if self.Ar is not None else np.linalg.inv(self.Ar_inv.to_dense())
        H = np.diag(self.diag_part * self.c) + self.c[:, None] * A * self.c[None, :]
        if self.gamma:
            H = H + self.gamma * np.outer(self.d_rank1, self.d_rank1)
        return H


# -- least squares -------------------------------------------------------------

def ls_loss(net, prob, rule=None, quad=None):
    q = quad or _quad(prob, net.p, rule)
    res = net(q.x) - prob.f(q.x)
    return 0.5 * q.total(prob.r(q.x) * res**2)


def ls_solve_linear(prob, p, rule=None, quad=None):
    """Output weights solving ``M_r(b) c = F(b)`` through ``c = Q T_M^-1 Q^T F``."""
    _check_interval(prob, p)
    q = quad or _quad(prob, p, rule)
    M = mass_operator(prob.r, p, quad=q)
    loads = hat_loads(_ls_integrand(prob.f, prob.r, p.x_lo), p, quad=q)
    return M.solve_loads(loads)


def ls_grad_b(net, prob, rule=None, quad=None):
    """``-c_j int_{b_j}^{x_hi} r (u_n - f)``."""
    q = quad or _quad(prob, net.p, rule)
    vals = prob.r(q.x) * (net(q.x) - prob.f(q.x))
    tail = np.cumsum(q.interval_sums(vals)[1:][::-1])[::-1]
    return -net.c * tail


def _coefficient_parts(r, p, q):
    Ar = coefficient_matrix(r, p, quad=q)
    return Ar, alphabeta_inverse(Ar)


def ls_hessian(net, prob, rule=None, quad=None):
    """``D(w) D(c) + D(c) A_r D(c)`` with ``w_j = r(b_j)(u_n(b_j) - f(b_j))``."""
    q = quad or _quad(prob, net.p, rule)
    b = net.p.b
    w = prob.r(b) * (net.breakpoint_values() - prob.f(b))
    Ar, Ar_inv = _coefficient_parts(prob.r, net.p, q)
    return StructuredHessian(w, net.c, Ar_inv, 0.0, None, Ar)


# -- diffusion-reaction -------------------------------------------------------

def dr_energy(net, prob, rule=None, quad=None):
    """``1/2 int a u'^2 + 1/2 int r u^2 - int f u + gamma/2 (u(x_hi) - beta)^2``."""
    q = quad or _quad(prob, net.p, rule)
    u = net(q.x)
    du = net.derivative(q.x)
    bulk = q.total(0.5 * prob.a(q.x) * du**2 + 0.5 * prob.r(q.x) * u**2 - prob.f(q.x) * u)
    return bulk + 0.5 * prob.gamma * (net.end_value() - prob.beta_bc) ** 2


def _dr_operator(prob, p, q):
    return stiffness_operator(prob.a, p, quad=q) + mass_operator(prob.r, p, quad=q)


def dr_solve_linear(prob, p, rule=None, quad=None):
    """Solve ``(A_a + M_r + gamma d d^T) c = F + gamma (beta - alpha) d``.

    ``A_a + M_r`` is inverted through ``Q (T_A + T_M)^-1 Q^T``; the penalty
    term is a Sherman-Morrison correction.  ``Q^T d`` is the last unit vector,
    because the last hat function is the only one not vanishing at ``x_hi``.
    """
    _check_interval(prob, p)
    q = quad or _quad(prob, p, rule)
    K = _dr_operator(prob, p, q)
    g = _dr_integrand(prob.f, prob.r, prob.alpha_bc, prob.literal_rhs)
    loads = hat_loads(g, p, quad=q)
    e_last = np.zeros(p.n)
    e_last[-1] = 1.0
    loads = loads + prob.gamma * (prob.beta_bc - prob.alpha_bc) * e_last
    # operate in hat coordinates y = Q^-1 c, where d becomes e_last
    upd = RankOneUpdate(lambda v: K.T.solve(v), e_last, e_last, prob.gamma)
    y = sherman_morrison_solve(upd, loads)
    return q_apply(p, y)


def _prefix_flux(c):
    """``sum_{k<j} c_k + c_j / 2``."""
    S = np.cumsum(c)
    return S - 0.5 * c


def dr_grad_b(net, prob, rule=None, quad=None):
    """``-c_j [a(b_j)(S_{j-1} + c_j/2) + int_{b_j}^{x_hi} (r u_n - f) + gamma (u_n(x_hi) - beta)]``."""
    q = quad or _quad(prob, net.p, rule)
    b = net.p.b
    vals = prob.r(q.x) * net(q.x) - prob.f(q.x)
    tail = np.cumsum(q.interval_sums(vals)[1:][::-1])[::-1]
    bracket = (prob.a(b) * _prefix_flux(net.c) + tail
               + prob.gamma * (net.end_value() - prob.beta_bc))
    return -net.c * bracket


def dr_hessian(net, prob, rule=None, quad=None):
    """``D(g) D(c) + D(c) A_r D(c) + gamma c c^T`` with
    ``g_j = r(b_j) u_n(b_j) - f(b_j) - a'(b_j)(S_{j-1} + c_j/2)``."""
    q = quad or _quad(prob, net.p, rule)
    b = net.p.b
    da = prob.a.derivative(b, span=net.p.length)
    g = prob.r(b) * net.breakpoint_values() - prob.f(b) - da * _prefix_flux(net.c)
    Ar, Ar_inv = _coefficient_parts(prob.r, net.p, q)
    return StructuredHessian(g, net.c, Ar_inv, prob.gamma, net.c, Ar)


def gauss_newton_matrix(net, prob, rule=None, quad=None):
    """``D(c) A_r D(c)`` (+ ``gamma c c^T`` for diffusion-reaction)."""
    q = quad or _quad(prob, net.p, rule)
    Ar, Ar_inv = _coefficient_parts(prob.r, net.p, q)
    gamma = prob.gamma if isinstance(prob, DRProblem) else 0.0
    return StructuredHessian(np.zeros(net.n), net.c, Ar_inv, gamma,
                             net.c if gamma else None, Ar)


# -- dispatch ------------------------------------------------------------------

def solve_linear(prob, p, rule=None, quad=None):
    if isinstance(prob, DRProblem):
        return dr_solve_linear(prob, p, rule, quad)
    return ls_solve_linear(prob, p, rule, quad)


def loss(net, prob, rule=None, quad=None):
    if isinstance(prob, DRProblem):
        return dr_energy(net, prob, rule, quad)
    return ls_loss(net, prob, rule, quad)


def grad_b(net, prob, rule=None, quad=None):
    if isinstance(prob, DRProblem):
        return dr_grad_b(net, prob, rule, quad)
    return ls_grad_b(net, prob, rule, quad)


def hessian(net, prob, rule=None, quad=None):
    if isinstance(prob, DRProblem):
        return dr_hessian(net, prob, rule, quad)
    return ls_hessian(net, prob, rule, quad)


# -- error norms ------------------------------------------------------------

ERROR_REFINE = 3


def _error_quad(net, rule, features):
    return PanelQuadrature.for_partition(net.p, rule or gauss_legendre(), features,
                                         refine=ERROR_REFINE)


def h1_rel_error(net, du_exact, rule=None, features=()):
    """``|u - u_n|_H1 / |u|_H1`` on panels split at breakpoints and ``features``."""
    q = _error_quad(net, rule, features)
    du = as_field(du_exact)(q.x)
    denom = q.total(du**2)
    if denom <= 0:
        raise ValueError("exact solution has zero H1 seminorm")
    return float(np.sqrt(q.total((du - net.derivative(q.x)) ** 2) / denom))


def l2_rel_error(net, u_exact, rule=None, features=()):
    q = _error_quad(net, rule, features)
    u = as_field(u_exact)(q.x)
    denom = q.total(u**2)
    if denom <= 0:
        raise ValueError("exact solution has zero L2 norm")
    return float(np.sqrt(q.total((u - net(q.x)) ** 2) / denom))
