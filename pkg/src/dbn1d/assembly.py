"""Mass and stiffness matrices of the ReLU basis and their O(n) inverses.

For breakpoints ``b_1 < ... < b_n`` the basis ``psi_i = sigma(x - b_i)`` gives
dense Gram matrices

    M_r[i, j] = int r psi_i psi_j,        A_a[i, j] = int a H(x - b_i) H(x - b_j).

Both factor as ``Q^-T T Q^-1`` with ``Q = G D(h)^-1 G`` and ``T`` tridiagonal.
``Q^T psi`` is the vector of piecewise-linear hat functions attached to the
nodes ``b_2, ..., b_n, x_hi``, so ``T`` is the Gram matrix of those hats and
the load ``Q^T F`` of any right-hand side ``F = int g psi`` can be assembled
element by element (see :func:`hat_loads`).
"""
from dataclasses import dataclass

import numpy as np

from .linalg import (
    AlphaBetaMatrix,
    TriDiagonal,
    alphabeta_inverse,
    q_apply,
    q_solve,
    qt_apply,
    qt_solve,
    tridiag_solve,
)
from .quadrature import PanelQuadrature, as_field

__all__ = [
    "FactorizedOperator",
    "AlgebraicMassInverse",
    "assemble_T_mass",
    "assemble_T_stiff",
    "mass_operator",
    "stiffness_operator",
    "assemble_mass_algebraic",
    "coefficient_matrix",
    "hat_loads",
    "rhs_ls",
    "rhs_dr",
    "boundary_gradient_vector",
    "dense_mass",
    "dense_stiffness",
]


def _quad(p, rule=None, quad=None, extra=None):
    if quad is not None:
        return quad
    return PanelQuadrature.for_partition(p, rule, extra)


def _local_moments(g, p, rule=None, quad=None, orders=(0, 1, 2)):
    """Per-interval ``int_{I_k} g (x - b_k)^m`` for k = 1..n and each m in ``orders``."""
    q = _quad(p, rule, quad)
    gx = g(q.x) if callable(g) else np.asarray(g)
    t = q.x - q.left
    return [q.interval_sums(gx * t**m)[1:] for m in orders]


def _hat_blocks(s0, s1, s2, h):
    """Element mass entries for the local coordinate ``t = (x - b_k)/h_k``.

    Returns ``(int r (1-t)^2, int r t (1-t), int r t^2)`` on each I_k.
    """
    m11 = s2 / h**2
    m01 = s1 / h - m11
    m00 = s0 - 2 * s1 / h + m11
    return m00, m01, m11


def assemble_T_mass(r, p, rule=None, quad=None):
    """Tridiagonal middle factor of ``M_r(b) = Q^-T T Q^-1``.

    Expanding ``(I-G^T) D00 (I-G) + (I-G^T) D01 G + G^T D10 (I-G) + G^T D11 G``
    band by band gives the hat-function stencil

        diag_k = m11_k + m00_{k+1}   (k < n),   diag_n = m11_n
        off_k  = m01_{k+1}
    """
    h = p.h[1:]
    s0, s1, s2 = _local_moments(as_field(r), p, rule, quad)
    m00, m01, m11 = _hat_blocks(s0, s1, s2, h)
    diag = m11.copy()
    diag[:-1] += m00[1:]
    return TriDiagonal.symmetric(diag, m01[1:])


def assemble_T_stiff(a, p, rule=None, quad=None):
    """Tridiagonal ``T_A = G^T D(h)^-2 D_a(s^0) G``."""
    h = p.h[1:]
    (s0,) = _local_moments(as_field(a), p, rule, quad, orders=(0,))
    k = s0 / h**2
    diag = k.copy()
    diag[:-1] += k[1:]
    return TriDiagonal.symmetric(diag, -k[1:])


@dataclass(frozen=True)
class FactorizedOperator:
    """``Q^-T T Q^-1`` for a partition ``p`` and tridiagonal ``T``."""

    p: object
    T: TriDiagonal
    kind: str = "mass"

    def apply(self, x):
        return qt_solve(self.p, self.T.matvec(q_solve(self.p, x)))

    def solve_loads(self, loads):
        """``Q T^-1 loads``; ``loads`` already expressed in the hat basis."""
        return q_apply(self.p, tridiag_solve(self.T, loads))

    def apply_inverse(self, x):
        return self.solve_loads(qt_apply(self.p, x))

    def __add__(self, other):
        return FactorizedOperator(self.p, self.T + other.T, f"{self.kind}+{other.kind}")

    def to_dense(self):
        n = self.p.n
        return np.column_stack([self.apply(e) for e in np.eye(n)])


def mass_operator(r, p, rule=None, quad=None):
    return FactorizedOperator(p, assemble_T_mass(r, p, rule, quad), "mass")


def stiffness_operator(a, p, rule=None, quad=None):
    return FactorizedOperator(p, assemble_T_stiff(a, p, rule, quad), "stiffness")


def _tail_first_moment(s0, s1, h):
    """``F_k = sum_{j>=k} int_{I_j} g (x - b_k)`` via ``F_k = s1_k + F_{k+1} + h_k S_{k+1}``.

    ``S_k`` is the suffix sum of ``s0``; the recursion avoids the cancellation
    of ``int x g - b_k int g``.
    """
    S = np.cumsum(s0[::-1])[::-1]
    incr = s1.copy()
    incr[:-1] += h[:-1] * S[1:]
    return np.cumsum(incr[::-1])[::-1]


def coefficient_matrix(r, p, rule=None, quad=None):
    """``A_r(b)`` as an alpha-beta matrix: ``alpha = 1``, ``beta_i = int_{b_i}^{x_hi} r``."""
    (s0,) = _local_moments(as_field(r), p, rule, quad, orders=(0,))
    beta = np.cumsum(s0[::-1])[::-1]
    return AlphaBetaMatrix(np.ones(p.n), beta)


@dataclass(frozen=True)
class AlgebraicMassInverse:
    """``M^-1 = M2^-1 (M1^-1 + M2^-1)^-1 M1^-1`` with tridiagonal factors."""

    M1inv: TriDiagonal
    M2inv: TriDiagonal
    middle: TriDiagonal

    def apply_inverse(self, x):
        return self.M2inv.matvec(tridiag_solve(self.middle, self.M1inv.matvec(x)))


def assemble_mass_algebraic(r, p, rule=None, quad=None):
    """Split ``m_ij = m1_ij + m2_ij`` into two alpha-beta matrices and invert each.

    ``m1_ij = int_{b_max}^{x_hi} r (x - x_hi)(x - b_max)`` and
    ``m2_ij = (x_hi - b_min) int_{b_max}^{x_hi} r (x - b_max)``.  Raises
    :class:`~dbn1d.linalg.AlphaBetaHypothesisError` when either factor is not
    invertible by the closed form; the geometric route has no such restriction.
    """
    h = p.h[1:]
    s0, s1, s2 = _local_moments(as_field(r), p, rule, quad)
    dist = p.x_hi - p.b
    beta2 = _tail_first_moment(s0, s1, h)
    # int_{I_j} r (x - x_hi)(x - b_k) expanded about b_j
    e = s2 - dist * s1
    qv = s1 - dist * s0
    beta1 = np.cumsum(e[::-1])[::-1] + (_tail_first_moment(qv, np.zeros_like(qv), h))
    M1 = AlphaBetaMatrix(np.ones(p.n), beta1)
    M2 = AlphaBetaMatrix(dist, beta2)
    M1inv = alphabeta_inverse(M1)
    M2inv = alphabeta_inverse(M2)
    return AlgebraicMassInverse(M1inv, M2inv, M1inv + M2inv)


def hat_loads(g, p, rule=None, quad=None):
    """``Q^T int g psi`` assembled locally: ``int g phi_k`` for the hats at ``b_2..x_hi``."""
    h = p.h[1:]
    s0, s1 = _local_moments(g, p, rule, quad, orders=(0, 1))
    rise = s1 / h
    out = rise.copy()
    out[:-1] += (s0 - rise)[1:]
    return out


def _ls_integrand(f, r, x_lo):
    f, r = as_field(f), as_field(r)
    f0 = float(f(np.array([x_lo]))[0])
    return lambda x: r(x) * (f(x) - f0)


def _dr_integrand(f, r, alpha, literal=False):
    f, r = as_field(f), as_field(r)
    if literal:
        return lambda x: f(x) - alpha
    return lambda x: f(x) - alpha * r(x)


def _first_moment_vector(g, p, rule=None, quad=None):
    h = p.h[1:]
    s0, s1 = _local_moments(g, p, rule, quad, orders=(0, 1))
    return _tail_first_moment(s0, s1, h)


def rhs_ls(f, r, p, rule=None, quad=None):
    """``F_i = int_{b_i}^{x_hi} r (f - f(x_lo)) (x - b_i) dx``."""
    return _first_moment_vector(_ls_integrand(f, r, p.x_lo), p, rule, quad)


def rhs_dr(f, r, alpha_bc, p, rule=None, quad=None, literal=False):
    """``F_i = int_{b_i}^{x_hi} (f - alpha r)(x - b_i) dx``.

    ``literal=True`` uses ``f - alpha`` instead, which coincides when ``r = 1``.
    """
    return _first_moment_vector(_dr_integrand(f, r, alpha_bc, literal), p, rule, quad)


def boundary_gradient_vector(p):
    """``d_i = x_hi - b_i``, the gradient of ``u_n(x_hi)`` in the output weights."""
    return p.x_hi - p.b


def _dense_grid(p, rule, refine):
    return PanelQuadrature.for_partition(p, rule, refine=refine)


def dense_mass(r, p, rule=None, refine=4):
    """Entrywise quadrature assembly of ``M_r`` (test oracle; O(n^2) memory)."""
    if p.n > 512:
        raise ValueError("dense oracle limited to n <= 512")
    q = _dense_grid(p, rule, refine)
    psi = np.maximum(q.x[:, None] - p.b[None, :], 0.0)
    wr = q.w * as_field(r)(q.x)
    M = (psi * wr[:, None]).T @ psi
    return 0.5 * (M + M.T)


def dense_stiffness(a, p, rule=None, refine=4):
    """Entrywise quadrature assembly of ``A_a`` (test oracle)."""
    if p.n > 512:
        raise ValueError("dense oracle limited to n <= 512")
    q = _dense_grid(p, rule, refine)
    H = (q.x[:, None] > p.b[None, :]).astype(float)
    wa = q.w * as_field(a)(q.x)
    A = (H * wa[:, None]).T @ H
    return 0.5 * (A + A.T)
