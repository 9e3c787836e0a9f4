"""dBN / dBGN outer iterations, structured direction solves and a BFGS baseline.

One dBN iteration is a block Gauss-Seidel sweep: the output weights ``c`` are
obtained by an exact linear solve at fixed breakpoints, then the breakpoints
take one damped Newton (or Gauss-Newton) step.  All linear algebra on this
path is O(n).
"""
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

from . import models
from .linalg import RankOneUpdate, sherman_morrison_solve, tridiag_solve
from .models import DRProblem, ShallowReLUNet
from .partition import PartitionError, project_ordered
from .quadrature import PanelQuadrature, gauss_legendre

__all__ = [
    "SolverConfig",
    "IterRecord",
    "IterTrace",
    "StructuredSolveError",
    "newton_direction",
    "gn_direction",
    "damped_update",
    "initial_net",
    "run_dbn",
    "run_dbgn",
    "run_bfgs_baseline",
    "bfgs_minimize",
    "joint_loss_and_grad",
]

log = logging.getLogger(__name__)

ZERO_WEIGHT_RTOL = 1e-12


class StructuredSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 100
    method: str = "dbn"
    init_step: float = 1.0
    shrink: float = 0.5
    max_backtracks: int = 30
    armijo_c: float = 1e-4
    grad_tol: float = 0.0
    min_gap: float = None
    quad_order: int = 5
    record_error: bool = True
    max_reprojections: int = 8
    damp_on: str = "reduced"
    bfgs_gtol: float = 1e-5

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")
        if self.method not in ("dbn", "dbgn", "bfgs", "adbn"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.damp_on not in ("reduced", "fixed"):
            raise ValueError("damp_on must be 'reduced' or 'fixed'")

    @property
    def rule(self):
        return gauss_legendre(self.quad_order)


@dataclass
class IterRecord:
    iter: int
    J: float
    e_n: float
    grad_norm: float
    eta: float
    n: int
    wall_ms: float
    direction: str = ""


@dataclass
class IterTrace:
    """Per-iteration records plus the final network."""

    records: list = field(default_factory=list)
    net: ShallowReLUNet = None
    events: list = field(default_factory=list)
    status: str = "running"

    def append(self, rec):
        self.records.append(rec)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def losses(self):
        return self.column("J")

    @property
    def final(self):
        return self.records[-1]

    def __len__(self):
        return len(self.records)


# -- direction solves ---------------------------------------------------------

def _guard(c):
    c = np.asarray(c, dtype=float)
    floor = ZERO_WEIGHT_RTOL * max(np.abs(c).max(initial=0.0), np.finfo(float).tiny)
    small = np.abs(c) < floor
    if not small.any():
        return c
    out = c.copy()
    out[small] = np.where(c[small] < 0, -floor, floor)
    return out


def _with_rank_one(H, c, base_solve, grad):
    if not H.gamma:
        return base_solve(grad)
    upd = RankOneUpdate(base_solve, c, c, H.gamma)
    return sherman_morrison_solve(upd, grad)


def newton_direction(H, grad):
    """Solve ``H p = grad`` in O(n).

    ``(D(s)D(c) + D(c) A D(c))^-1 = (I + D(c)^-1 A^-1 D(s))^-1 D(c)^-1 A^-1 D(c)^-1``
    where ``A^-1`` is the tridiagonal alpha-beta inverse, so the only solve is
    with the nonsymmetric tridiagonal ``I + D(c)^-1 A^-1 D(s)``.  The penalty
    term ``gamma c c^T`` is added by Sherman-Morrison.
    """
    c = _guard(H.c)
    K = H.Ar_inv.scale_rows(1.0 / c).scale_cols(H.diag_part).add_identity()

    def base(v):
        return tridiag_solve(K, H.Ar_inv.matvec(v / c) / c)

    return _with_rank_one(H, c, base, np.asarray(grad, dtype=float))


def gn_direction(H, grad):
    """``(D(c) A D(c) + gamma c c^T)^-1 grad``; the ``diag_part`` of ``H`` is ignored."""
    c = _guard(H.c)

    def base(v):
        return H.Ar_inv.matvec(v / c) / c

    return _with_rank_one(H, c, base, np.asarray(grad, dtype=float))


# -- damping -------------------------------------------------------------------

def _candidate(net, b_new, min_gap):
    """Sorted, projected network and the projected breakpoints in the input order."""
    order = np.argsort(b_new, kind="stable")
    p = project_ordered(b_new[order], net.p.x_lo, net.p.x_hi, min_gap)
    b_eff = np.empty_like(b_new)
    b_eff[order] = p.b
    return ShallowReLUNet(net.c0, net.c[order], p), b_eff


def damped_update(net, prob, direction, cfg, grad=None, J0=None, quad_fn=None):
    """Backtracking Armijo step ``b <- P(b - eta p)``.

    ``P`` sorts and projects onto admissible partitions.  A trial is accepted
    when ``J(P(b - eta p)) <= J(b) - armijo_c grad^T (b - P(b - eta p))``,
    which reduces to the usual ``armijo_c eta grad^T p`` when no projection
    is active.  With ``cfg.damp_on == "reduced"`` the trial loss is taken
    after re-solving for ``c``; since ``c`` is optimal at ``b`` the gradient
    of that reduced loss is still ``grad``.  ``"fixed"`` keeps ``c``.

    Returns ``(eta, net)``; ``eta = 0`` and the input net when no trial is
    accepted.
    """
    eta, out, _, _ = _line_search(net, prob, direction, cfg, grad, J0, quad_fn)
    return eta, out


def _line_search(net, prob, direction, cfg, grad=None, J0=None, quad_fn=None):
    quad_fn = quad_fn or (lambda p: PanelQuadrature.for_partition(p, cfg.rule, prob.resolution))
    direction = np.asarray(direction, dtype=float)
    if not np.all(np.isfinite(direction)):
        raise ValueError("non-finite search direction")
    if grad is None:
        grad = models.grad_b(net, prob, quad=quad_fn(net.p))
    if J0 is None:
        J0 = models.loss(net, prob, quad=quad_fn(net.p))
    if not np.any(direction) or float(np.dot(grad, direction)) <= 0:
        return 0.0, net, J0, None
    gap = cfg.min_gap if cfg.min_gap is not None else net.p.min_gap
    reduced = cfg.damp_on == "reduced"
    eta = cfg.init_step
    for _ in range(cfg.max_backtracks):
        try:
            cand, b_eff = _candidate(net, net.p.b - eta * direction, gap)
        except PartitionError:
            cand = None
        if cand is not None:
            decrease = float(np.dot(grad, net.p.b - b_eff))
            if decrease > 0:
                q = quad_fn(cand.p)
                try:
                    if reduced:
                        cand = ShallowReLUNet(net.c0, models.solve_linear(prob, cand.p, quad=q),
                                              cand.p)
                    J = models.loss(cand, prob, quad=q)
                except np.linalg.LinAlgError:
                    J = np.inf
                if np.isfinite(J) and J <= J0 - cfg.armijo_c * decrease:
                    return eta, cand, J, q
        eta *= cfg.shrink
    return 0.0, net, J0, None


# -- outer loop ----------------------------------------------------------------

def initial_net(prob, p):
    """Network on partition ``p`` with ``c`` from the exact linear solve."""
    return ShallowReLUNet(prob.c0, models.solve_linear(prob, p), p)


def error_metric(net, prob, rule=None):
    """Relative H1 seminorm error for DR, relative L2 error for LS; nan if unknown."""
    feats = prob.resolution
    if isinstance(prob, DRProblem):
        if prob.du_exact is None:
            return float("nan")
        return models.h1_rel_error(net, prob.du_exact, rule, feats)
    exact = prob.u_exact if prob.u_exact is not None else prob.f
    return models.l2_rel_error(net, exact, rule, feats)


def _solve_with_repair(prob, p, cfg):
    """Linear solve; on a degenerate partition re-project with a doubled gap."""
    gap = p.min_gap
    for _ in range(cfg.max_reprojections):
        quad = PanelQuadrature.for_partition(p, cfg.rule, prob.resolution)
        try:
            return p, models.solve_linear(prob, p, quad=quad), quad
        except np.linalg.LinAlgError as exc:
            gap *= 2.0
            log.warning("linear solve failed (%s); re-projecting with min_gap=%g", exc, gap)
            p = project_ordered(p.b, p.x_lo, p.x_hi, gap)
    raise StructuredSolveError("linear solve failed after re-projection")


def _direction(net, prob, quad, grad, method):
    if method == "dbgn":
        return gn_direction(models.gauss_newton_matrix(net, prob, quad=quad), grad), "gn"
    try:
        d = newton_direction(models.hessian(net, prob, quad=quad), grad)
        if np.all(np.isfinite(d)) and np.dot(grad, d) > 0:
            return d, "newton"
    except np.linalg.LinAlgError:
        pass
    return gn_direction(models.gauss_newton_matrix(net, prob, quad=quad), grad), "gn-fallback"


def _record(trace, k, net, prob, J, gnorm, eta, t0, cfg, tag=""):
    e = error_metric(net, prob, cfg.rule) if cfg.record_error else float("nan")
    trace.append(IterRecord(k, float(J), e, float(gnorm), float(eta), net.n,
                            1e3 * (time.perf_counter() - t0), tag))


def run_dbn(prob, net0, cfg=None, trace=None, start_iter=0, callback=None):
    """Damped block Newton.

    Record ``k`` holds the loss and error after the ``k``-th breakpoint step
    and the following linear solve, the gradient norm used in that step and
    the accepted step size; record 0 is the initial state.  ``callback(k,
    net, trace)`` may return True to stop early.
    """
    cfg = cfg or SolverConfig()
    method = "dbgn" if cfg.method == "dbgn" else "dbn"
    trace = trace if trace is not None else IterTrace()
    t0 = time.perf_counter()
    p, c, quad = _solve_with_repair(prob, net0.p, cfg)
    net = ShallowReLUNet(prob.c0, c, p)
    J = models.loss(net, prob, quad=quad)
    grad = models.grad_b(net, prob, quad=quad)
    if start_iter == 0:
        _record(trace, 0, net, prob, J, np.linalg.norm(grad), float("nan"), t0, cfg, "init")

    def qf(part):
        return PanelQuadrature.for_partition(part, cfg.rule, prob.resolution)

    for k in range(start_iter + 1, start_iter + cfg.max_iters + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= cfg.grad_tol:
            trace.status = "converged"
            break
        d, tag = _direction(net, prob, quad, grad, method)
        eta, moved, J_moved, q_moved = _line_search(net, prob, d, cfg, grad, J, qf)
        if eta > 0:
            if cfg.damp_on == "reduced":
                net, J, quad = moved, J_moved, q_moved
            else:
                try:
                    p, c, quad = _solve_with_repair(prob, moved.p, cfg)
                except StructuredSolveError:
                    trace.status = "solve-failed"
                    break
                net = ShallowReLUNet(prob.c0, c, p)
                J_new = models.loss(net, prob, quad=quad)
                # exact minimisation over c cannot increase the loss
                J = min(J_new, J_moved)
            grad = models.grad_b(net, prob, quad=quad)
        _record(trace, k, net, prob, J, gnorm, eta, t0, cfg, tag)
        if callback is not None and callback(k, net, trace):
            break
    else:
        trace.status = "max-iters"
    trace.net = net
    return trace


def run_dbgn(prob, net0, cfg=None, **kw):
    cfg = cfg or SolverConfig(method="dbgn")
    if cfg.method != "dbgn":
        cfg = SolverConfig(**{**cfg.__dict__, "method": "dbgn"})
    return run_dbn(prob, net0, cfg, **kw)


# -- BFGS baseline -------------------------------------------------------------

def _split(theta):
    n = theta.size // 2
    return theta[:n], theta[n:]


def joint_loss_and_grad(theta, prob, rule=None):
    """Loss and gradient in the joint parameter ``(c, b)`` with unconstrained ``b``.

    Breakpoints may be unordered or leave the interval; the network is then
    evaluated as the plain sum of ReLUs.  O(n^2) per call, as for a generic
    optimizer.
    """
    c, b = _split(np.asarray(theta, dtype=float))
    rule = rule or gauss_legendre()
    inside = np.sort(b[(b > prob.x_lo) & (b < prob.x_hi)])
    nodes = np.concatenate(([prob.x_lo], inside, [prob.x_hi]))
    q = PanelQuadrature(nodes, rule, prob.resolution)
    x = q.x
    diff = x[:, None] - b[None, :]
    psi = np.maximum(diff, 0.0)
    H = (diff > 0).astype(float)
    u = prob.c0 + psi @ c
    r = prob.r(x)
    f = prob.f(x)
    if isinstance(prob, DRProblem):
        du = H @ c
        a = prob.a(x)
        end = prob.c0 + np.maximum(prob.x_hi - b, 0.0) @ c
        pen = end - prob.beta_bc
        J = q.total(0.5 * a * du**2 + 0.5 * r * u**2 - f * u) + 0.5 * prob.gamma * pen**2
        res = r * u - f
        gc = (q.w * a * du) @ H + (q.w * res) @ psi + prob.gamma * pen * np.maximum(prob.x_hi - b, 0.0)
        # one-sided slopes averaged at each kink
        kink = np.heaviside(b[:, None] - b[None, :], 0.5) @ c
        interior = (b > prob.x_lo) & (b < prob.x_hi)
        flux = np.where(interior, prob.a(np.clip(b, prob.x_lo, prob.x_hi)) * kink, 0.0)
        gb = -c * (flux + (q.w * res) @ H + prob.gamma * pen * (b < prob.x_hi))
    else:
        res = r * (u - f)
        J = 0.5 * q.total(res * (u - f))
        gc = (q.w * res) @ psi
        gb = -c * ((q.w * res) @ H)
    return float(J), np.concatenate((gc, gb))


def bfgs_minimize(fun_and_grad, x0, max_iters=100, gtol=1e-5, callback=None):
    """Inverse-Hessian BFGS with a strong Wolfe line search.

    Starts from the identity and stops when ``max|g| <= gtol``, on line-search
    failure or after ``max_iters`` iterations.  ``callback(k, x, f, g, step)``
    is called after every accepted step.

    Returns
    -------
    x, f, g : final point, value and gradient
    status : "converged", "line-search-failed" or "max-iters"
    """
    x = np.array(x0, dtype=float)
    m = x.size
    cache = {}

    def fg(z):
        key = z.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = fun_and_grad(z)
        return cache[key]

    f, g = fun_and_grad(x)
    Hinv = np.eye(m)
    f_prev = f + 0.5 * np.linalg.norm(g)
    status = "max-iters"
    for k in range(1, max_iters + 1):
        if np.abs(g).max() <= gtol:
            status = "converged"
            break
        d = -Hinv @ g
        if np.dot(d, g) >= 0:
            Hinv = np.eye(m)
            d = -g
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", module="scipy.optimize._linesearch")
            # old_old_fval sets the first trial step, as scipy's own BFGS does
            step, _, _, f_new, _, g_new = line_search(lambda z: fg(z)[0], lambda z: fg(z)[1],
                                                      x, d, g, f, f_prev, maxiter=30)
        if step is None:
            status = "line-search-failed"
            break
        if g_new is None:
            g_new = fg(x + step * d)[1]
        s = step * d
        y = g_new - g
        x = x + s
        f_prev, f, g = f, float(f_new), np.asarray(g_new, dtype=float)
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = (Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * np.dot(y, Hy) + rho) * np.outer(s, s))
        if callback is not None:
            callback(k, x, f, g, step)
    else:
        if np.abs(g).max() <= gtol:
            status = "converged"
    return x, f, g, status


def run_bfgs_baseline(prob, net0, cfg=None, seed=0):
    """BFGS on the joint ``(c, b)`` vector, see :func:`bfgs_minimize`.

    Stops when the largest gradient component drops below ``cfg.bfgs_gtol``
    (``1e-5`` by default, as in ``scipy.optimize.minimize``), on line-search
    failure or after ``cfg.max_iters`` iterations.  Set ``bfgs_gtol=0`` for a
    fixed budget.  Records use the same schema as :func:`run_dbn`; ``eta`` is
    the line-search step.  ``seed`` is accepted for interface symmetry; the
    method is deterministic.
    """
    cfg = cfg or SolverConfig(method="bfgs")
    rule = cfg.rule
    trace = IterTrace()
    t0 = time.perf_counter()
    theta0 = np.concatenate((net0.c, net0.p.b))
    n = net0.n

    def as_net(th):
        c, b = _split(th)
        order = np.argsort(b, kind="stable")
        try:
            p = project_ordered(b[order], prob.x_lo, prob.x_hi, net0.p.min_gap)
        except PartitionError:
            return None
        return ShallowReLUNet(prob.c0, c[order], p)

    def rec(k, th, J, g, eta):
        e = float("nan")
        nt = as_net(th)
        if cfg.record_error and nt is not None:
            e = error_metric(nt, prob, rule)
        trace.append(IterRecord(k, float(J), e, float(np.linalg.norm(g)), float(eta), n,
                                1e3 * (time.perf_counter() - t0), "bfgs"))

    J0, g0 = joint_loss_and_grad(theta0, prob, rule)
    rec(0, theta0, J0, g0, float("nan"))
    theta, _, _, status = bfgs_minimize(
        lambda th: joint_loss_and_grad(th, prob, rule), theta0, cfg.max_iters,
        max(cfg.grad_tol, cfg.bfgs_gtol),
        callback=lambda k, th, J, g, eta: rec(k, th, J, g, eta))
    trace.status = status
    trace.net = as_net(theta)
    return trace
