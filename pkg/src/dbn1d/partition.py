"""Breakpoint partitions of an interval.

A :class:`Partition` holds the hidden-layer biases (breakpoints) of a shallow
ReLU network on ``[x_lo, x_hi]``.  Instances are immutable; every update
produces a new object.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

__all__ = [
    "Partition",
    "PartitionError",
    "AffineMap",
    "default_min_gap",
    "make_uniform",
    "project_ordered",
]

_REL_MIN_GAP = 1e-8


class PartitionError(ValueError):
    pass


def default_min_gap(x_lo, x_hi):
    return _REL_MIN_GAP * (x_hi - x_lo)


@dataclass(frozen=True)
class Partition:
    """Ordered breakpoints ``x_lo <= b_1 < ... < b_n < x_hi``.

    The first breakpoint may sit exactly on ``x_lo`` (zero-length first
    interval); every other gap, including ``x_hi - b_n``, must be at least
    ``min_gap``.
    """

    b: np.ndarray
    x_lo: float = 0.0
    x_hi: float = 1.0
    min_gap: float = None
    h: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = np.array(self.b, dtype=float).ravel()
        x_lo, x_hi = float(self.x_lo), float(self.x_hi)
        if not x_lo < x_hi:
            raise PartitionError(f"degenerate interval ({x_lo}, {x_hi})")
        if b.size == 0:
            raise PartitionError("a partition needs at least one breakpoint")
        gap = default_min_gap(x_lo, x_hi) if self.min_gap is None else float(self.min_gap)
        if gap <= 0:
            raise PartitionError("min_gap must be positive")
        h = np.diff(np.concatenate(([x_lo], b, [x_hi])))
        # a gap computed by subtraction can be a few ulps short of min_gap
        slack = 16 * np.finfo(float).eps * max(abs(x_lo), abs(x_hi))
        if h[0] < -slack or np.any(h[1:] < gap * (1 - 1e-12) - slack):
            raise PartitionError(
                f"breakpoints violate ordering/min_gap={gap:g}: smallest gap {h[1:].min():g}"
            )
        b.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x_lo", x_lo)
        object.__setattr__(self, "x_hi", x_hi)
        object.__setattr__(self, "min_gap", gap)
        object.__setattr__(self, "h", h)

    @property
    def n(self):
        return self.b.size

    @property
    def length(self):
        return self.x_hi - self.x_lo

    @property
    def nodes(self):
        """``(x_lo, b_1, ..., b_n, x_hi)``."""
        return np.concatenate(([self.x_lo], self.b, [self.x_hi]))

    def with_breakpoints(self, b):
        return Partition(b, self.x_lo, self.x_hi, self.min_gap)

    def check(self):
        """Re-verify all invariants; returns True or raises."""
        Partition(self.b, self.x_lo, self.x_hi, self.min_gap)
        if abs(self.h.sum() - self.length) > 1e-13 * max(1.0, abs(self.x_hi), abs(self.x_lo)):
            raise PartitionError("gaps do not sum to the interval length")
        return True


def make_uniform(n, x_lo=0.0, x_hi=1.0, anchor="interior", min_gap=None):
    """Uniformly spaced breakpoints.

    ``anchor="interior"`` places ``b_i = x_lo + i L/(n+1)`` (all points strictly
    inside).  ``anchor="left"`` places ``b_i = x_lo + (i-1) L/n``, i.e. the
    first neuron sits on the left endpoint; this is the initialisation used in
    all reproduction experiments.
    """
    if int(n) != n or n < 1:
        raise PartitionError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if not x_lo < x_hi:
        raise PartitionError(f"degenerate interval ({x_lo}, {x_hi})")
    L = x_hi - x_lo
    if anchor == "interior":
        b = x_lo + np.arange(1, n + 1) * (L / (n + 1))
    elif anchor == "left":
        b = x_lo + np.arange(n) * (L / n)
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    return Partition(b, x_lo, x_hi, min_gap)


def project_ordered(b_raw, x_lo=0.0, x_hi=1.0, min_gap=None):
    """Nearest (in the 2-norm) admissible partition to ``b_raw``.

    The raw points are sorted, then projected onto
    ``{x_lo + g <= b_1, b_{i+1} - b_i >= g, b_n <= x_hi - g}``.  With the shift
    ``z_i = b_i - i g`` the gap constraints become monotonicity of ``z``, so the
    projection is an isotonic regression followed by clipping.  Ties are split
    symmetrically about their mean.  Inputs that already satisfy the
    constraints are returned unchanged.
    """
    b = np.sort(np.asarray(b_raw, dtype=float).ravel(), kind="stable")
    n = b.size
    g = default_min_gap(x_lo, x_hi) if min_gap is None else float(min_gap)
    if n == 0:
        raise PartitionError("empty breakpoint vector")
    if not g * (n + 1) < x_hi - x_lo:
        raise PartitionError(f"min_gap={g:g} infeasible for n={n} on ({x_lo}, {x_hi})")
    if not np.all(np.isfinite(b)):
        raise PartitionError("non-finite breakpoint")
    h = np.diff(np.concatenate(([x_lo], b, [x_hi])))
    if np.all(h >= g):
        return Partition(b, x_lo, x_hi, g)
    shift = g * np.arange(1, n + 1)
    z = isotonic_regression(b - shift).x
    z = np.clip(z, x_lo, x_hi - (n + 1) * g)
    b = z + shift
    # rounding in z + shift can shave a few ulps off a gap
    b = np.maximum.accumulate(np.maximum(b, x_lo + g) - shift) + shift
    b = np.minimum(b, x_hi - g * np.arange(n, 0, -1))
    return Partition(b, x_lo, x_hi, g)


@dataclass(frozen=True)
class AffineMap:
    """``x = x_lo + L t`` between ``[x_lo, x_hi]`` and ``[0, 1]``."""

    x_lo: float
    x_hi: float

    @property
    def length(self):
        return self.x_hi - self.x_lo

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.x_lo) / self.length

    def from_unit(self, t):
        return self.x_lo + self.length * np.asarray(t, dtype=float)
