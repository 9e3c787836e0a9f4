"""Acceptance suite: criteria 1-10, one verdict line each.

Criteria 1-7 are oracle and property checks; 8-10 reproduce published
numbers with loose tolerances.  Every test appends a line
``criterion k: PASS|FAIL ...`` that is printed in the terminal summary.
"""
import time
import tracemalloc

import numpy as np
import pytest
from conftest import VERDICTS
from helpers import (
    backward_error,
    central_fd,
    random_net,
    random_partition,
    random_poly_field,
    smooth_dr,
    smooth_ls,
)

from dbn1d import models
from dbn1d.adaptivity import AdaptiveConfig, convergence_rate, local_indicators, refine, run_adbn
from dbn1d.assembly import (
    assemble_mass_algebraic,
    dense_mass,
    dense_stiffness,
    mass_operator,
    stiffness_operator,
)
from dbn1d.experiments import measure_condition
from dbn1d.linalg import AlphaBetaMatrix, alphabeta_inverse, count_ops
from dbn1d.models import ShallowReLUNet, to_unit_problem
from dbn1d.partition import Partition, make_uniform
from dbn1d.problems import REGISTRY, get_problem
from dbn1d.solvers import (
    SolverConfig,
    error_metric,
    gn_direction,
    initial_net,
    newton_direction,
    run_bfgs_baseline,
    run_dbgn,
    run_dbn,
)

def _verdict(k, checks, elapsed):
    """Record and assert ``checks = [(label, value_text, ok), ...]``."""
    ok = all(c[2] for c in checks)
    detail = "; ".join(f"{label} {text}{'' if good else ' [FAIL]'}" for label, text, good in checks)
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def _left(n):
    return make_uniform(n, anchor="left")


def test_criterion_01_structured_inverses():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = dict(ab=0.0, mass=0.0, mass_inv=0.0, alg_inv=0.0, stiff=0.0, stiff_inv=0.0)
    count = 0
    for n in (4, 16, 64):
        for _ in range(20):
            p = random_partition(rng, n)
            r, a = random_poly_field(rng), random_poly_field(rng)
            alpha = np.cumsum(rng.uniform(0.5, 1.5, n))
            beta = np.cumsum(rng.uniform(0.5, 1.5, n)[::-1])[::-1]
            m = AlphaBetaMatrix(alpha, beta)
            D = m.to_dense()
            worst["ab"] = max(worst["ab"], np.abs(alphabeta_inverse(m).to_dense() @ D - np.eye(n)).max())
            x = rng.standard_normal(n)
            Md = dense_mass(r, p)
            M = mass_operator(r, p)
            worst["mass"] = max(worst["mass"], np.abs(M.to_dense() - Md).max() / np.abs(Md).max())
            worst["mass_inv"] = max(worst["mass_inv"], backward_error(Md, M.apply_inverse(x), x))
            alg = assemble_mass_algebraic(r, p).apply_inverse(x)
            worst["alg_inv"] = max(worst["alg_inv"], backward_error(Md, alg, x))
            Ad = dense_stiffness(a, p)
            A = stiffness_operator(a, p)
            worst["stiff"] = max(worst["stiff"], np.abs(A.to_dense() - Ad).max() / np.abs(Ad).max())
            worst["stiff_inv"] = max(worst["stiff_inv"], backward_error(Ad, A.apply_inverse(x), x))
            count += 1
    elapsed = time.perf_counter() - t0
    checks = [(k, f"{v:.1e}", v <= 1e-9) for k, v in worst.items()]
    checks += [("instances", str(count), count >= 60), ("runtime<10s", f"{elapsed:.1f}", elapsed < 10)]
    _verdict(1, checks, elapsed)


def _with_b(net, b):
    return ShallowReLUNet(net.c0, net.c, Partition(b, net.p.x_lo, net.p.x_hi))


def test_criterion_02_calculus():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_g, worst_h, count = 0.0, 0.0, 0
    for kind in ("ls", "dr"):
        for n in (2, 4, 8, 16):
            for _ in range(7):
                prob = smooth_ls(rng) if kind == "ls" else smooth_dr(rng)
                p = random_partition(rng, n)
                net = random_net(rng, prob, p)
                g = models.grad_b(net, prob)
                fd = central_fd(lambda b: models.loss(_with_b(net, b), prob), p.b, 1e-6)
                worst_g = max(worst_g, np.abs(g - fd).max() / np.abs(g).max())
                H = models.hessian(net, prob).to_dense()
                fdH = central_fd(lambda b: models.grad_b(_with_b(net, b), prob), p.b, 1e-5)
                worst_h = max(worst_h, np.linalg.norm(H - fdH) / np.linalg.norm(H))
                count += 1
    elapsed = time.perf_counter() - t0
    _verdict(2, [("grad", f"{worst_g:.1e}", worst_g <= 1e-5),
                 ("hessian", f"{worst_h:.1e}", worst_h <= 2e-4),
                 ("instances", str(count), count >= 50),
                 ("runtime<30s", f"{elapsed:.1f}", elapsed < 30)], elapsed)


def test_criterion_03_fast_direction_solves():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = {"newton": 0.0, "gn": 0.0}
    for k in range(40):
        prob = smooth_dr(rng, gamma=1e4) if k % 2 else smooth_ls(rng)
        n = int(rng.integers(1, 33))
        net = random_net(rng, prob, random_partition(rng, n))
        g = rng.standard_normal(n)
        for name, H, solve in (("newton", models.hessian(net, prob), newton_direction),
                               ("gn", models.gauss_newton_matrix(net, prob), gn_direction)):
            D = H.to_dense()
            p = solve(H, g)
            res = np.linalg.norm(D @ p - g) / (np.linalg.norm(D, 2) * np.linalg.norm(p))
            worst[name] = max(worst[name], res)
    # allocation check at a size where one dense matrix would dominate
    n = 4000
    prob = get_problem("dr_exp_bump")
    net = random_net(rng, prob, make_uniform(n))
    H, G = models.hessian(net, prob), models.gauss_newton_matrix(net, prob)
    newton_direction(H, np.ones(n))
    tracemalloc.start()
    newton_direction(H, np.ones(n))
    gn_direction(G, np.ones(n))
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    elapsed = time.perf_counter() - t0
    dense_bytes = 8 * n * n
    _verdict(3, [("newton residual", f"{worst['newton']:.1e}", worst["newton"] <= 1e-10),
                 ("gn residual", f"{worst['gn']:.1e}", worst["gn"] <= 1e-10),
                 ("peak alloc / dense", f"{peak / dense_bytes:.1e}", peak < 0.01 * dense_bytes)],
             elapsed)


def test_criterion_04_condition_scaling():
    t0 = time.perf_counter()
    k = [measure_condition("mass", n) for n in (8, 16, 32)]
    ratios = [k[1] / k[0], k[2] / k[1]]
    elapsed = time.perf_counter() - t0
    _verdict(4, [(f"ratio {a}->{b}", f"{q:.2f}", 8 <= q <= 32)
                 for (a, b), q in zip(((8, 16), (16, 32)), ratios)], elapsed)


def test_criterion_05_refinement_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    worst_change, worst_increase = 0.0, -np.inf
    for k in range(30):
        prob = smooth_dr(rng) if k % 2 else smooth_ls(rng)
        n = int(rng.integers(2, 40))
        net = initial_net(prob, random_partition(rng, n))
        marked = rng.choice(n + 1, size=int(rng.integers(1, n + 2)), replace=False)
        out = refine(net, marked)
        # both sides on the refined panels; the coarse panels integrate a smooth
        # load less accurately, which is quadrature error and not a change of function
        quad = models._quad(prob, out.p)
        J0 = models.loss(net, prob, quad=quad)
        scale = max(1.0, abs(J0))
        worst_change = max(worst_change, abs(models.loss(out, prob, quad=quad) - J0) / scale)
        solved = initial_net(prob, out.p)
        worst_increase = max(worst_increase, (models.loss(solved, prob, quad=quad) - J0) / scale)
    elapsed = time.perf_counter() - t0
    _verdict(5, [("insert change", f"{worst_change:.1e}", worst_change <= 1e-12),
                 ("max increase after solve", f"{worst_increase:.1e}", worst_increase <= 1e-12)],
             elapsed)


def test_criterion_06_monotonicity():
    t0 = time.perf_counter()
    runs = {"ls_sqrt": (20, {}), "dr_exp_bump": (22, {}), "dr_singular": (32, {"nu": 1e-4})}
    assert set(runs) == set(REGISTRY)
    checks = []
    cfg = SolverConfig(max_iters=150, record_error=False)
    for name, (n, params) in runs.items():
        prob, _ = to_unit_problem(get_problem(name, **params))
        net = initial_net(prob, _left(n))
        for runner in (run_dbn, run_dbgn):
            J = run_dbn(prob, net, cfg).losses if runner is run_dbn else runner(prob, net, cfg).losses
            worst = float(np.max(np.diff(J)))
            checks.append((f"{name}/{runner.__name__[4:]}", f"max dJ {worst:.1e}", worst <= 0.0))
    _verdict(6, checks, time.perf_counter() - t0)


def test_criterion_07_linear_scaling():
    t0 = time.perf_counter()
    prob = get_problem("dr_exp_bump")
    # five iterations take full steps at both sizes, so the work per iteration matches
    cfg = SolverConfig(max_iters=5, record_error=False)

    def timed(n):
        net = initial_net(prob, _left(n))
        best = np.inf
        for _ in range(3):
            s = time.perf_counter()
            run_dbn(prob, net, cfg)
            best = min(best, time.perf_counter() - s)
        with count_ops() as ops:
            tr = run_dbn(prob, net, cfg)
        assert all(r.eta == 1.0 for r in tr.records[1:])
        return best, sum(ops.values())

    run_dbn(prob, initial_net(prob, _left(256)), cfg)  # warm up the compiled kernels
    t_small, ops_small = timed(1024)
    t_big, ops_big = timed(8192)
    ratio = t_big / t_small
    _verdict(7, [("t(8192)/t(1024)", f"{ratio:.2f}", ratio <= 12),
                 ("kernel work ratio", f"{ops_big / ops_small:.2f}", 4 <= ops_big / ops_small <= 12)],
             time.perf_counter() - t0)


def test_criterion_08_least_squares_sqrt():
    t0 = time.perf_counter()
    prob = get_problem("ls_sqrt")
    J0 = models.loss(initial_net(prob, _left(20)), prob)
    cfg = SolverConfig(max_iters=1000, record_error=False)
    bfgs_cfg = SolverConfig(max_iters=1000, method="bfgs", record_error=False)
    finals = {}
    for n in (24, 48):
        net = initial_net(prob, _left(n))
        finals[n] = (run_dbn(prob, net, cfg).final.J, run_bfgs_baseline(prob, net, bfgs_cfg).final.J)
    elapsed = time.perf_counter() - t0
    checks = [("J0(n=20)", f"{J0:.3e}", abs(J0 / 3.17e-5 - 1) <= 0.2),
              ("dBN J(n=24)", f"{finals[24][0]:.2e}", finals[24][0] <= 1e-6)]
    for n, (j_dbn, j_bfgs) in finals.items():
        checks.append((f"BFGS/dBN n={n}", f"{j_bfgs:.2e}/{j_dbn:.2e}={j_bfgs / j_dbn:.1f}",
                       j_bfgs >= 5 * j_dbn))
    checks.append(("runtime<60s", f"{elapsed:.1f}", elapsed < 60))
    _verdict(8, checks, elapsed)


def test_criterion_09_exponential_bump():
    t0 = time.perf_counter()
    prob = get_problem("dr_exp_bump")
    net0 = initial_net(prob, _left(22))
    e0 = error_metric(net0, prob)
    e_dbn = error_metric(run_dbn(prob, net0, SolverConfig(max_iters=500, record_error=False)).net, prob)
    ad = run_adbn(prob, initial_net(prob, _left(20)), SolverConfig(), acfg=AdaptiveConfig(eps_stop=0.05))
    last = ad.events[-1]
    est = local_indicators(ad.net, prob).rel_estimator
    fixed = run_dbn(prob, initial_net(prob, _left(last.n)),
                    SolverConfig(max_iters=500, record_error=False)).net
    r_fixed = convergence_rate(error_metric(fixed, prob), last.n)
    elapsed = time.perf_counter() - t0
    _verdict(9, [("e0(n=22)", f"{e0:.4f}", abs(e0 - 0.228) <= 0.01),
                 ("dBN e_n", f"{e_dbn:.4f}", e_dbn <= 0.12),
                 ("AdBN final n", f"{last.n} (status {ad.status})", True),
                 ("AdBN r", f"{last.r:.3f}", last.r >= 0.85),
                 ("fixed r at same n", f"{r_fixed:.3f}", last.r - r_fixed >= 0.03),
                 ("estimator/e_n", f"{est / last.e_n:.2f}", est / last.e_n <= 6),
                 ("runtime<60s", f"{elapsed:.1f}", elapsed < 60)], elapsed)


def test_criterion_10_singular_perturbation():
    t0 = time.perf_counter()
    checks = []
    cfg = SolverConfig(max_iters=200, record_error=False)
    for nu in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        prob, _ = to_unit_problem(get_problem("dr_singular", nu=nu))
        net0 = initial_net(prob, _left(32))
        net = run_dbn(prob, net0, cfg).net
        e = error_metric(net, prob)
        if nu == 1e-4:
            e0 = error_metric(net0, prob)
            checks.append(("e0(nu=1e-4)", f"{e0:.4f}", abs(e0 - 0.889) <= 0.02))
            l2 = models.l2_rel_error(net, prob.u_exact, None, prob.resolution)
            params = 2 * net.n + 1
            checks.append((f"L2 ({params} params)", f"{l2:.2e}", l2 <= 3e-3 and params == 65))
        checks.append((f"e_n(nu={nu:g})", f"{e:.4f}", e <= 0.12))
    elapsed = time.perf_counter() - t0
    checks.append(("runtime<60s", f"{elapsed:.1f}", elapsed < 60))
    _verdict(10, checks, elapsed)
