"""Adaptive neuron enhancement driven by a recovery-type error indicator.

The discrete flux ``a u_n'`` is piecewise constant.  Its continuous
piecewise-linear recovery ``G`` is compared with it on every subinterval
``K``, and a scaled residual of the recovered flux is added:

    xi_K^2 = int_K a^-1 (G(a u_n') - a u_n')^2 + h_K^2 int_K (-G(a^2 u_n')' + r u_n - f)^2

Intervals with above-average indicators get a new neuron at their midpoint
with zero output weight, so the network function is unchanged by refinement.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .models import ShallowReLUNet
from .quadrature import PanelQuadrature, gauss_legendre
from .solvers import IterTrace, SolverConfig, error_metric, run_dbn

__all__ = [
    "IndicatorReport",
    "RefinementRow",
    "recover_flux",
    "local_indicators",
    "mark_average",
    "refine",
    "run_adbn",
    "convergence_rate",
    "AdaptiveConfig",
]

log = logging.getLogger(__name__)

# intervals shorter than this many min_gaps carry no flux information
DEGENERATE_FACTOR = 10.0


@dataclass(frozen=True)
class IndicatorReport:
    xi: np.ndarray
    xi_total: float
    rel_estimator: float


@dataclass
class RefinementRow:
    n: int
    e_n: float
    xi_n: float
    r: float
    iters: int


def convergence_rate(e_n, n):
    """``r`` with ``e_n = n^-r``; nan when ``e_n`` is not in (0, 1) or ``n < 2``."""
    if not (0.0 < e_n < 1.0) or n < 2:
        return float("nan")
    return float(np.log(1.0 / e_n) / np.log(n))


def _active(p):
    return p.h > DEGENERATE_FACTOR * p.min_gap


def _interval_flux(net, weight, quad):
    """Mean of ``weight * u_n'`` over each of the n+1 intervals (0 on degenerate ones)."""
    vals = weight(quad.x) * net.derivative(quad.x)
    sums = quad.interval_sums(vals)
    h = net.p.h
    out = np.zeros_like(h)
    ok = h > 0
    out[ok] = sums[ok] / h[ok]
    return out


def _recover(q, p):
    """Nodal values of the continuous piecewise-linear recovery of interval values ``q``."""
    h = p.h
    act = _active(p)
    idx = np.flatnonzero(act)
    qa, ha = q[act], h[act]
    nodes = p.nodes
    vals = np.empty(nodes.size)
    # nodes bounding active intervals, in order
    left = np.empty(idx.size + 1)
    left[0] = qa[0]
    left[-1] = qa[-1]
    left[1:-1] = (ha[:-1] * qa[1:] + ha[1:] * qa[:-1]) / (ha[:-1] + ha[1:])
    # node k sits left of interval k; a degenerate interval shares both of its nodes' value
    pos = np.searchsorted(idx, np.arange(nodes.size), side="left")
    vals[:] = left[np.clip(pos, 0, idx.size)]
    return vals


def recover_flux(net, prob, rule=None, power=1):
    """Nodal values of ``G(a^power u_n')`` at ``(x_lo, b_1, ..., b_n, x_hi)``.

    Interior nodes take ``(h_{k-1} q_k + h_k q_{k-1}) / (h_{k-1} + h_k)``,
    endpoints copy the one-sided flux.  Intervals shorter than
    ``10 * min_gap`` are skipped.
    """
    q = PanelQuadrature.for_partition(net.p, rule or gauss_legendre(), prob.resolution)
    return _recover(_interval_flux(net, lambda x: prob.a(x) ** power, q), net.p)


def _linear_on_intervals(vals, p, quad):
    """Value and slope of the piecewise-linear nodal interpolant at quadrature nodes."""
    h = p.h
    slope = np.zeros_like(h)
    ok = h > 0
    slope[ok] = np.diff(vals)[ok] / h[ok]
    k = quad.idx
    return vals[k] + slope[k] * (quad.x - quad.left), slope[k]


def local_indicators(net, prob, rule=None, residual="squared"):
    """Per-interval indicators ``xi_K`` for the n+1 intervals ``I_0..I_n``.

    ``residual="squared"`` recovers ``a^2 u_n'`` for the residual term;
    ``"conventional"`` uses ``a u_n'``.  ``rel_estimator`` divides the total by
    ``||a^-1/2 G(a u_n')||``.  Degenerate intervals get ``xi_K = 0``.
    """
    if residual not in ("squared", "conventional"):
        raise ValueError("residual must be 'squared' or 'conventional'")
    rule = rule or gauss_legendre()
    p = net.p
    q = PanelQuadrature.for_partition(p, rule, prob.resolution)
    a = prob.a(q.x)
    flux = a * net.derivative(q.x)
    G, _ = _linear_on_intervals(_recover(_interval_flux(net, prob.a, q), p), p, q)
    power = 2 if residual == "squared" else 1
    weight = (lambda x: prob.a(x) ** 2) if power == 2 else prob.a
    _, dG = _linear_on_intervals(_recover(_interval_flux(net, weight, q), p), p, q)
    res = -dG + prob.r(q.x) * net(q.x) - prob.f(q.x)
    t1 = q.interval_sums((G - flux) ** 2 / a)
    t2 = p.h**2 * q.interval_sums(res**2)
    xi2 = np.where(_active(p), t1 + t2, 0.0)
    xi = np.sqrt(xi2)
    total = float(np.sqrt(xi2.sum()))
    norm = float(np.sqrt(q.total(G**2 / a)))
    rel = total / norm if norm > 0 else float("inf")
    return IndicatorReport(xi, total, rel)


def mark_average(report):
    """Indices ``K`` with ``xi_K >= mean(xi)``; the mean runs over nonzero indicators."""
    xi = np.asarray(report.xi if isinstance(report, IndicatorReport) else report, dtype=float)
    if xi.size == 0:
        raise ValueError("no intervals to mark")
    live = xi > 0
    if not live.any():
        return np.arange(xi.size)
    # equal indicators can average to a hair above each of them
    thresh = xi[live].mean() * (1.0 - 1e-12)
    return np.flatnonzero(live & (xi >= thresh))


def refine(net, marked):
    """Insert the midpoint of every marked interval with zero output weight.

    Interval ``k`` is ``[nodes[k], nodes[k+1]]`` with ``nodes = (x_lo, b, x_hi)``.
    Midpoints closer than ``min_gap`` to an existing node are skipped.
    """
    marked = np.unique(np.asarray(marked, dtype=int))
    if marked.size == 0:
        raise ValueError("nothing marked")
    p = net.p
    nodes = p.nodes
    if marked.min() < 0 or marked.max() > p.n:
        raise IndexError("marked interval index out of range")
    mids = 0.5 * (nodes[marked] + nodes[marked + 1])
    half = 0.5 * p.h[marked]
    mids = mids[half >= p.min_gap]
    if mids.size == 0:
        return net
    b = np.concatenate((p.b, mids))
    c = np.concatenate((net.c, np.zeros(mids.size)))
    order = np.argsort(b, kind="stable")
    return ShallowReLUNet(net.c0, c[order], p.with_breakpoints(b[order]))


@dataclass(frozen=True)
class AdaptiveConfig:
    eps_stop: float = 0.05
    stall_tol: float = 1e-7
    max_level_iters: int = 200
    max_neurons: int = 400
    max_levels: int = 30
    residual: str = "squared"


def run_adbn(prob, net0, cfg=None, eps_stop=0.05, acfg=None):
    """Adaptive dBN: dBN iterations with refinement when the estimator stagnates.

    A level ends when ``|xi_total^(k) - xi_total^(k-1)| < stall_tol`` or after
    ``max_level_iters`` iterations.  Its final state is appended to
    ``trace.events`` as a :class:`RefinementRow`; the run stops when the
    relative estimator is at most ``eps_stop`` or ``max_neurons`` is reached,
    otherwise the average-marked intervals are refined.
    """
    cfg = cfg or SolverConfig(method="adbn")
    acfg = acfg or AdaptiveConfig(eps_stop=eps_stop)
    eps_stop = acfg.eps_stop
    solver_cfg = SolverConfig(**{**cfg.__dict__, "method": "dbn", "max_iters": acfg.max_level_iters})
    trace = IterTrace()
    net = net0
    it = 0
    t0 = time.perf_counter()
    for level in range(acfg.max_levels):
        state = {"prev": None, "iters": 0}

        def stalled(k, cur, tr, state=state):
            rep = local_indicators(cur, prob, cfg.rule, acfg.residual)
            prev = state["prev"]
            state["prev"] = rep.xi_total
            state["iters"] += 1
            return prev is not None and abs(rep.xi_total - prev) < acfg.stall_tol

        run_dbn(prob, net, solver_cfg, trace=trace, start_iter=it, callback=stalled)
        net = trace.net
        it = trace.records[-1].iter
        rep = local_indicators(net, prob, cfg.rule, acfg.residual)
        e = error_metric(net, prob, cfg.rule)
        row = RefinementRow(net.n, e, rep.rel_estimator, convergence_rate(e, net.n), state["iters"])
        trace.events.append(row)
        log.info("level %d: n=%d e_n=%.3e xi=%.3e", level, net.n, e, rep.rel_estimator)
        if rep.rel_estimator <= eps_stop:
            trace.status = "converged"
            break
        if net.n >= acfg.max_neurons:
            trace.status = "max-neurons"
            break
        grown = refine(net, mark_average(rep))
        if grown.n == net.n:
            trace.status = "no-refinement-possible"
            break
        if grown.n > acfg.max_neurons:
            trace.status = "max-neurons"
            break
        net = grown
    else:
        trace.status = "max-levels"
    trace.net = net
    trace.wall_ms = 1e3 * (time.perf_counter() - t0)
    return trace
