import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dbn1d.models import to_unit_problem
from dbn1d.partition import AffineMap, Partition, PartitionError, make_uniform, project_ordered
from dbn1d.problems import get_problem
from dbn1d.solvers import SolverConfig, error_metric, initial_net


@pytest.mark.parametrize("n, lo, hi, expected", [
    (1, 0.0, 1.0, [0.5]),
    (3, 0.0, 1.0, [0.25, 0.5, 0.75]),
    (4, -1.0, 1.0, [-0.6, -0.2, 0.2, 0.6]),
])
def test_make_uniform_examples(n, lo, hi, expected):
    p = make_uniform(n, lo, hi)
    np.testing.assert_allclose(p.b, expected, atol=1e-15)
    np.testing.assert_allclose(p.h, (hi - lo) / (n + 1), rtol=1e-14)


def test_make_uniform_left_anchor():
    p = make_uniform(4, -1.0, 1.0, anchor="left")
    np.testing.assert_allclose(p.b, [-1.0, -0.5, 0.0, 0.5])
    assert p.h[0] == 0.0


@pytest.mark.parametrize("args", [(0, 0.0, 1.0), (3, 1.0, 1.0), (2.5, 0.0, 1.0)])
def test_make_uniform_rejects(args):
    with pytest.raises(PartitionError):
        make_uniform(*args)


def test_partition_rejects_unordered():
    with pytest.raises(PartitionError):
        Partition(np.array([0.6, 0.4]))
    with pytest.raises(PartitionError):
        Partition(np.array([0.4, 1.0]))


@pytest.mark.parametrize("raw, expected", [
    ((0.7, 0.3), (0.3, 0.7)),
    ((0.5, 0.5), (0.495, 0.505)),
    ((-0.2, 0.4), (0.01, 0.4)),
])
def test_project_examples(raw, expected):
    p = project_ordered(np.array(raw), 0.0, 1.0, 0.01)
    np.testing.assert_allclose(p.b, expected, atol=1e-14)
    p.check()


def test_project_returns_admissible_input_unchanged():
    b = np.array([0.1, 0.35, 0.9])
    assert np.array_equal(project_ordered(b, 0.0, 1.0, 0.01).b, b)


def test_project_infeasible_gap():
    with pytest.raises(PartitionError):
        project_ordered(np.zeros(10), 0.0, 1.0, 0.1)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-3.0, 4.0)),
       st.sampled_from([1e-8, 1e-4, 1e-3]))
def test_project_invariants(raw, gap):
    p = project_ordered(raw, 0.0, 1.0, gap)
    p.check()
    # gaps computed by subtraction may be a few ulps short
    tol = gap * (1 - 1e-9) - 16 * np.finfo(float).eps
    assert np.all(np.diff(p.b) >= tol)
    assert p.b[0] >= tol and 1.0 - p.b[-1] >= tol
    assert abs(p.h.sum() - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0.05, 0.95)))
def test_project_is_idempotent(raw):
    p = project_ordered(raw, 0.0, 1.0, 1e-3)
    q = project_ordered(p.b, 0.0, 1.0, 1e-3)
    np.testing.assert_allclose(q.b, p.b, atol=1e-15)


def test_affine_map_roundtrip():
    m = AffineMap(-1.0, 1.0)
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(m.to_unit(m.from_unit(t)), t, atol=1e-15)
    assert m.length == 2.0


def test_unit_map_identity_and_scaling():
    bump = get_problem("dr_exp_bump")
    assert to_unit_problem(bump)[0] is bump
    sing = get_problem("dr_singular", nu=1e-2)
    unit, _ = to_unit_problem(sing)
    assert unit.a.constant_value == pytest.approx(1e-2 / 4)
    assert unit.gamma == pytest.approx(sing.gamma / 2)
    assert (unit.x_lo, unit.x_hi) == (0.0, 1.0)


def test_unit_map_preserves_error():
    """Relative H1 error is the same whether the net lives on (-1, 1) or on (0, 1)."""
    sing = get_problem("dr_singular", nu=1e-2)
    unit, amap = to_unit_problem(sing)
    pu = make_uniform(16, anchor="left")
    pn = Partition(amap.from_unit(pu.b), -1.0, 1.0)
    rule = SolverConfig().rule
    e_unit = error_metric(initial_net(unit, pu), unit, rule)
    e_nat = error_metric(initial_net(sing, pn), sing, rule)
    assert abs(e_unit - e_nat) <= 1e-12 * max(1.0, e_nat)
