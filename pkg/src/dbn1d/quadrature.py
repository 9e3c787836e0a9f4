"""Composite Gauss-Legendre quadrature over breakpoint partitions.

Every integral in the solvers is a sum of per-subinterval integrals of a
coefficient function against a low-degree polynomial.  :class:`PanelQuadrature`
lays Gauss nodes on each subinterval ``I_k = [b_k, b_{k+1}]`` (optionally
split further at extra resolution points) and keeps the interval index of each
node so interval sums reduce to one ``np.bincount``.
"""
import functools
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureRule",
    "ScalarField",
    "PanelQuadrature",
    "as_field",
    "constant",
    "gauss_legendre",
    "integrate",
    "moments",
    "tail_integrals",
]

DEFAULT_ORDER = 5


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval ``[-1, 1]``."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


@functools.lru_cache(maxsize=None)
def gauss_legendre(order=DEFAULT_ORDER):
    if order < 1:
        raise ValueError("quadrature order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(order, x, w)


class ScalarField:
    """A real function of one variable with an optional derivative.

    When no derivative is supplied, :meth:`derivative` falls back to a central
    difference with step ``fd_rel_step * span`` and emits a warning once.
    """

    fd_rel_step = 1e-6

    def __init__(self, f, df=None, name=None, constant_value=None):
        self.f = f
        self.df = df
        self.name = name or getattr(f, "__name__", "field")
        self.constant_value = constant_value
        self._warned = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.f(x), dtype=float), x.shape).copy()

    @property
    def is_constant(self):
        return self.constant_value is not None

    def derivative(self, x, span=1.0):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.zeros_like(x)
        if self.df is not None:
            return np.broadcast_to(np.asarray(self.df(x), dtype=float), x.shape).copy()
        if not self._warned:
            warnings.warn(
                f"no analytic derivative for {self.name!r}; using central differences",
                RuntimeWarning,
                stacklevel=2,
            )
            self._warned = True
        step = self.fd_rel_step * span
        return (self(x + step) - self(x - step)) / (2 * step)

    def __repr__(self):
        return f"ScalarField({self.name})"


def constant(value, name=None):
    v = float(value)
    return ScalarField(lambda x: np.full(np.shape(x), v), lambda x: np.zeros(np.shape(x)),
                       name=name or f"{v:g}", constant_value=v)


def as_field(obj):
    if isinstance(obj, ScalarField):
        return obj
    if callable(obj):
        return ScalarField(obj)
    return constant(obj)


def integrate(g, lo, hi, rule=None, panels=1):
    """Composite Gauss-Legendre approximation of the integral of ``g`` over ``[lo, hi]``."""
    rule = rule or gauss_legendre()
    if hi < lo:
        raise ValueError("integrate expects lo <= hi")
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
    w = (half[:, None] * rule.weights[None, :]).ravel()
    return float(np.dot(w, as_field(g)(x)))


class PanelQuadrature:
    """Gauss nodes over the subintervals ``I_0, ..., I_n`` of a partition.

    Parameters
    ----------
    nodes : array
        Sorted interval endpoints ``(x_lo, b_1, ..., b_n, x_hi)``.
    rule : QuadratureRule
    extra : array, optional
        Additional points at which subintervals are split (features of the
        integrand such as interior layers).
    refine : int
        Each panel is further cut into ``refine`` equal pieces.

    Attributes
    ----------
    x, w : arrays
        Quadrature nodes and weights.
    idx : int array
        Index ``k`` of the subinterval ``I_k`` containing each node.
    left : array
        Left endpoint ``b_k`` of the subinterval of each node.
    """

    def __init__(self, nodes, rule=None, extra=None, refine=1):
        rule = rule or gauss_legendre()
        nodes = np.asarray(nodes, dtype=float)
        self.nodes = nodes
        self.n_intervals = nodes.size - 1
        edges = nodes
        if extra is not None and len(extra):
            extra = np.asarray(extra, dtype=float)
            extra = extra[(extra > nodes[0]) & (extra < nodes[-1])]
            edges = np.union1d(nodes, extra)
        if refine > 1:
            t = np.arange(refine) / refine
            edges = np.append((edges[:-1, None] + np.diff(edges)[:, None] * t).ravel(), edges[-1])
        lo, hi = edges[:-1], edges[1:]
        # panel -> interval: panels never straddle a node
        pid = np.searchsorted(nodes, 0.5 * (lo + hi), side="right") - 1
        pid = np.clip(pid, 0, self.n_intervals - 1)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        self.x = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
        self.w = (half[:, None] * rule.weights[None, :]).ravel()
        self.idx = np.repeat(pid, rule.order)
        self.left = nodes[self.idx]

    @classmethod
    def for_partition(cls, p, rule=None, extra=None, refine=1):
        return cls(p.nodes, rule, extra, refine)

    def interval_sums(self, values):
        """``(sum over I_k of w * values)`` for ``k = 0..n``."""
        return np.bincount(self.idx, weights=self.w * values, minlength=self.n_intervals)

    def total(self, values):
        return float(np.dot(self.w, values))


def _quad(p, rule, quad, extra=None):
    if quad is not None:
        return quad
    return PanelQuadrature.for_partition(p, rule, extra)


def moments(r, p, k, rule=None, quad=None):
    """``s_i^k = int_{I_i} r(x) (x - b_i)^k dx`` for ``i = 1..n``.

    The interval ``I_0 = [x_lo, b_1]`` is omitted: every ReLU basis function
    vanishes there.
    """
    if k not in (0, 1, 2):
        raise ValueError("moment order must be 0, 1 or 2")
    q = _quad(p, rule, quad)
    vals = as_field(r)(q.x) * (q.x - q.left) ** k
    return q.interval_sums(vals)[1:]


def tail_integrals(g, p, rule=None, quad=None):
    """``v_j = int_{b_j}^{x_hi} g dx`` for ``j = 1..n`` by suffix sums."""
    q = _quad(p, rule, quad)
    vals = g(q.x) if callable(g) else np.asarray(g)
    per = q.interval_sums(vals)[1:]
    return np.cumsum(per[::-1])[::-1]
