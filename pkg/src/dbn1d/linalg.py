"""O(n) kernels: tridiagonal solves, alpha-beta matrices, difference operators.

The dense matrices that appear in shallow ReLU discretisations are never formed
on the solver path.  They are represented through

* :class:`TriDiagonal` -- three bands, Thomas elimination without pivoting;
* :class:`AlphaBetaMatrix` -- ``M_ij = alpha_min(i,j) * beta_max(i,j)``, whose
  inverse is tridiagonal in closed form;
* the first-difference matrix ``G`` and ``Q = G diag(h)^-1 G``;
* rank-one corrections solved by Sherman-Morrison.

Work done by the kernels can be tallied with :func:`count_ops`.
"""
import contextlib
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

__all__ = [
    "TriDiagonal",
    "AlphaBetaMatrix",
    "RankOneUpdate",
    "SingularTridiagonalError",
    "AlphaBetaHypothesisError",
    "SingularUpdateError",
    "tridiag_solve",
    "alphabeta_inverse",
    "apply_G",
    "apply_Ginv",
    "apply_GT",
    "apply_GTinv",
    "q_apply",
    "q_solve",
    "qt_apply",
    "qt_solve",
    "sherman_morrison_solve",
    "count_ops",
]

PIVOT_RTOL = 1e-14
SM_RTOL = 1e-12


class SingularTridiagonalError(np.linalg.LinAlgError):
    def __init__(self, index, pivot):
        super().__init__(f"near-zero pivot {pivot:.3e} at row {index}")
        self.index = index
        self.pivot = pivot


class AlphaBetaHypothesisError(np.linalg.LinAlgError):
    pass


class SingularUpdateError(np.linalg.LinAlgError):
    pass


_counter = None


@contextlib.contextmanager
def count_ops():
    """Tally the vector lengths processed by each kernel inside the block."""
    global _counter
    prev, _counter = _counter, Counter()
    try:
        yield _counter
    finally:
        _counter = prev


def _tally(name, size):
    if _counter is not None:
        _counter[name] += size


@numba.njit(cache=True)
def _thomas(sub, diag, sup, rhs, tol):
    n = diag.shape[0]
    cp = np.empty(n)
    x = np.empty(n)
    piv = diag[0]
    if abs(piv) <= tol:
        return x, 0, piv
    cp[0] = sup[0] / piv if n > 1 else 0.0
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * cp[i - 1]
        if abs(piv) <= tol:
            return x, i, piv
        if i < n - 1:
            cp[i] = sup[i] / piv
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x, -1, 0.0


@dataclass(frozen=True)
class TriDiagonal:
    """Tridiagonal matrix stored by bands (``sub[i] = T[i+1, i]``, ``sup[i] = T[i, i+1]``)."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        for name in ("sub", "diag", "sup"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = self.diag.size
        if self.sub.size != max(n - 1, 0) or self.sup.size != max(n - 1, 0):
            raise ValueError("off-diagonal bands must have length n - 1")

    @classmethod
    def symmetric(cls, diag, off):
        return cls(off, diag, off)

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n - 1), np.ones(n), np.zeros(n - 1))

    @property
    def n(self):
        return self.diag.size

    @property
    def scale(self):
        return max(np.abs(self.diag).max(initial=0.0), np.abs(self.sub).max(initial=0.0),
                   np.abs(self.sup).max(initial=0.0))

    def matvec(self, x):
        _tally("tridiag_matvec", self.n)
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    __matmul__ = matvec

    def solve(self, rhs):
        return tridiag_solve(self, rhs)

    @property
    def T(self):
        return TriDiagonal(self.sup, self.diag, self.sub)

    def __add__(self, other):
        return TriDiagonal(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def scale_rows(self, s):
        """``diag(s) @ self``."""
        s = np.asarray(s, dtype=float)
        return TriDiagonal(self.sub * s[1:], self.diag * s, self.sup * s[:-1])

    def scale_cols(self, s):
        """``self @ diag(s)``."""
        s = np.asarray(s, dtype=float)
        return TriDiagonal(self.sub * s[:-1], self.diag * s, self.sup * s[1:])

    def add_identity(self):
        return TriDiagonal(self.sub, self.diag + 1.0, self.sup)

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def tridiag_solve(T, rhs):
    """Solve ``T x = rhs`` by Thomas elimination.

    Raises :class:`SingularTridiagonalError` (with the offending row) when a
    pivot falls below ``1e-14 * max|T|``.
    """
    rhs = np.ascontiguousarray(rhs, dtype=float)
    if rhs.shape != (T.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({T.n},)")
    _tally("tridiag_solve", T.n)
    tol = PIVOT_RTOL * T.scale
    x, bad, piv = _thomas(T.sub, T.diag, T.sup, rhs, tol)
    if bad >= 0:
        raise SingularTridiagonalError(bad, piv)
    return x


@dataclass(frozen=True)
class AlphaBetaMatrix:
    """Symmetric matrix with entries ``alpha[min(i,j)] * beta[max(i,j)]``.

    Construction checks ``alpha_1 != 0``, ``beta_n != 0`` and
    ``alpha_{i+1} beta_i != alpha_i beta_{i+1}``, which guarantee a tridiagonal
    inverse.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).ravel()
        b = np.array(self.beta, dtype=float).ravel()
        if a.shape != b.shape or a.size == 0:
            raise ValueError("alpha and beta must be non-empty and of equal length")
        scale = max(np.abs(a).max(), 1e-300) * max(np.abs(b).max(), 1e-300)
        tol = PIVOT_RTOL * scale
        det = a[1:] * b[:-1] - a[:-1] * b[1:]
        if abs(a[0]) * max(np.abs(b).max(), 1e-300) <= tol:
            raise AlphaBetaHypothesisError("alpha_1 vanishes")
        if abs(b[-1]) * max(np.abs(a).max(), 1e-300) <= tol:
            raise AlphaBetaHypothesisError("beta_n vanishes")
        if det.size and np.min(np.abs(det)) <= tol:
            i = int(np.argmin(np.abs(det)))
            raise AlphaBetaHypothesisError(
                f"alpha_(i+1) beta_i - alpha_i beta_(i+1) vanishes at i={i + 1}"
            )
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def n(self):
        return self.alpha.size

    def matvec(self, x):
        """O(n) product: ``y_i = beta_i sum_{j<=i} alpha_j x_j + alpha_i sum_{j>i} beta_j x_j``."""
        _tally("alphabeta_matvec", self.n)
        x = np.asarray(x, dtype=float)
        lower = np.cumsum(self.alpha * x)
        upper = np.cumsum((self.beta * x)[::-1])[::-1]
        upper = np.append(upper[1:], 0.0)
        return self.beta * lower + self.alpha * upper

    __matmul__ = matvec

    def to_dense(self):
        i = np.arange(self.n)
        lo = np.minimum.outer(i, i)
        hi = np.maximum.outer(i, i)
        return self.alpha[lo] * self.beta[hi]


def alphabeta_inverse(m):
    """Closed-form tridiagonal inverse of an :class:`AlphaBetaMatrix`.

    With padding ``alpha_0 = beta_{n+1} = 0`` and ``alpha_{n+1} = beta_0 = 1``::

        inv[i, i]   = (a[i+1] b[i-1] - a[i-1] b[i+1]) / ((a[i] b[i-1] - a[i-1] b[i]) (a[i+1] b[i] - a[i] b[i+1]))
        inv[i, i+1] = -1 / (a[i+1] b[i] - a[i] b[i+1])
    """
    _tally("alphabeta_inverse", m.n)
    a = np.concatenate(([0.0], m.alpha, [1.0]))
    b = np.concatenate(([1.0], m.beta, [0.0]))
    # w[k] = a[k+1] b[k] - a[k] b[k+1], k = 0..n
    w = a[1:] * b[:-1] - a[:-1] * b[1:]
    diag = (a[2:] * b[:-2] - a[:-2] * b[2:]) / (w[:-1] * w[1:])
    off = -1.0 / w[1:-1]
    return TriDiagonal.symmetric(diag, off)


def apply_G(x):
    """First difference ``(x_1, x_2 - x_1, ..., x_n - x_{n-1})``."""
    _tally("G", len(x))
    x = np.asarray(x, dtype=float)
    return np.diff(x, prepend=0.0)


def apply_Ginv(x):
    """Prefix sums."""
    _tally("G", len(x))
    return np.cumsum(x, dtype=float)


def apply_GT(x):
    """``(x_1 - x_2, ..., x_{n-1} - x_n, x_n)``."""
    _tally("G", len(x))
    x = np.asarray(x, dtype=float)
    return -np.diff(x, append=0.0)


def apply_GTinv(x):
    """Suffix sums."""
    _tally("G", len(x))
    x = np.asarray(x, dtype=float)
    return np.cumsum(x[::-1])[::-1]


def _gaps(p):
    # D(h) = diag(h_1, ..., h_n): every gap except the one left of b_1
    return p.h[1:] if hasattr(p, "h") else np.asarray(p, dtype=float)


def q_apply(p, x):
    """``Q x`` with ``Q = G D(h)^-1 G``."""
    return apply_G(apply_G(x) / _gaps(p))


def q_solve(p, x):
    """``Q^-1 x = G^-1 D(h) G^-1 x``."""
    return apply_Ginv(apply_Ginv(x) * _gaps(p))


def qt_apply(p, x):
    """``Q^T x = G^T D(h)^-1 G^T x``."""
    return apply_GT(apply_GT(x) / _gaps(p))


def qt_solve(p, x):
    """``Q^-T x = G^-T D(h) G^-T x``."""
    return apply_GTinv(apply_GTinv(x) * _gaps(p))


@dataclass(frozen=True)
class RankOneUpdate:
    """The operator ``B + gamma u v^T`` given a solver for ``B``."""

    base_solve: Callable[[np.ndarray], np.ndarray]
    u: np.ndarray
    v: np.ndarray
    gamma: float


def sherman_morrison_solve(upd, rhs):
    """Solve ``(B + gamma u v^T) x = rhs`` with two solves against ``B``."""
    y = upd.base_solve(rhs)
    if upd.gamma == 0.0:
        return y
    z = upd.base_solve(upd.u)
    vz = float(np.dot(upd.v, z))
    denom = 1.0 + upd.gamma * vz
    if abs(denom) <= SM_RTOL * max(1.0, abs(upd.gamma * vz)):
        raise SingularUpdateError(f"Sherman-Morrison denominator {denom:.3e}")
    return y - (upd.gamma * float(np.dot(upd.v, y)) / denom) * z
