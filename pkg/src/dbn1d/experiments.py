"""Experiment orchestration: configuration, trace files, conditioning and rates.

Every run writes three files into its output directory:

``trace.csv``
    one row per iteration with header ``iter,J,e_n,grad_norm,eta,n,wall_ms``.
``summary.txt``
    a single ``key=value`` line (final loss, error, rate, seed, ...).
``b_final.csv``
    final breakpoints, one per line, 17 significant digits.

Adaptive runs also write ``refinements.csv`` with ``n,e_n,xi_n,r`` rows.
"""
import csv
import dataclasses
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import problems
from .adaptivity import AdaptiveConfig, convergence_rate, run_adbn
from .assembly import dense_mass, dense_stiffness
from .models import DRProblem, to_unit_problem
from .partition import AffineMap, make_uniform
from .quadrature import gauss_legendre
from .solvers import SolverConfig, initial_net, run_bfgs_baseline, run_dbn

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "ExperimentResult",
    "TRACE_HEADER",
    "build_problem",
    "load_config",
    "parse_config_text",
    "run_experiment",
    "measure_condition",
    "rate_report",
]

log = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "J", "e_n", "grad_norm", "eta", "n", "wall_ms")
METHODS = ("dbn", "dbgn", "bfgs", "adbn")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "ls_sqrt"
    n: int = 20
    method: str = "dbn"
    max_iters: int = 100
    gamma: float = 1e4
    eps_stop: float = 0.05
    quad_order: int = 5
    seed: int = 0
    out: str = "runs/latest"
    nu: float = 1e-4
    anchor: str = "left"
    max_neurons: int = 400
    level_iters: int = 200
    # custom problems
    kind: str = "dr"
    f: str = None
    a: str = "1"
    r: str = "1"
    u: str = None
    du: str = None
    alpha: float = 0.0
    beta: float = 0.0
    x_lo: float = 0.0
    x_hi: float = 1.0

    def validate(self):
        errs = []
        if self.problem not in problems.REGISTRY and self.problem != "custom":
            errs.append(f"problem: unknown {self.problem!r}")
        if self.problem == "custom" and not self.f:
            errs.append("f: custom problems need an expression for f")
        if self.method not in METHODS:
            errs.append(f"method: must be one of {METHODS}")
        if self.n < 1:
            errs.append("n: must be >= 1")
        if self.max_iters < 0:
            errs.append("max_iters: must be >= 0")
        if not self.gamma > 0:
            errs.append("gamma: must be > 0")
        if not self.nu > 0:
            errs.append("nu: must be > 0")
        if not self.eps_stop > 0:
            errs.append("eps_stop: must be > 0")
        if self.quad_order < 1:
            errs.append("quad_order: must be >= 1")
        if self.anchor not in ("left", "interior"):
            errs.append("anchor: must be 'left' or 'interior'")
        if self.method == "adbn" and self.problem == "ls_sqrt":
            errs.append("method: adbn needs a diffusion-reaction problem")
        if errs:
            raise ConfigError("; ".join(errs))
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"iters": "max_iters", "eps-stop": "eps_stop", "quad-order": "quad_order",
            "level-iters": "level_iters", "max-neurons": "max_neurons"}


def _coerce(key, value):
    fld = _FIELDS[key]
    typ = fld.type if isinstance(fld.type, type) else {"int": int, "float": float, "str": str}.get(
        str(fld.type), str)
    if fld.default is None or typ is str:
        return str(value)
    try:
        if typ is int:
            return int(float(value)) if float(value).is_integer() else int(value)
        return typ(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ.__name__}") from None


def parse_config_text(text):
    """Parse the flat ``key = value`` format.

    One assignment per line; ``#`` starts a comment; blank lines are ignored;
    keys are field names of :class:`ExperimentConfig` (dashes allowed).
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, **overrides):
    """Config file values, then ``overrides`` (``None`` values ignored)."""
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    for k, v in overrides.items():
        if v is not None:
            if k not in _FIELDS:
                raise ConfigError(f"unknown key {k!r}")
            values[k] = _coerce(k, v)
    return ExperimentConfig(**values).validate()


def build_problem(cfg):
    """Problem on (0, 1) plus the map back to its natural interval."""
    if cfg.problem == "custom":
        prob = problems.custom_problem(cfg.kind, cfg.f, cfg.a, cfg.r, cfg.alpha, cfg.beta,
                                       cfg.gamma, cfg.x_lo, cfg.x_hi, cfg.u, cfg.du)
    else:
        params = {"gamma": cfg.gamma}
        if cfg.problem == "dr_singular":
            params["nu"] = cfg.nu
        prob = problems.get_problem(cfg.problem, **params)
    return to_unit_problem(prob)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: object
    summary: dict
    paths: dict


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            w.writerow([r.iter, repr(r.J), repr(r.e_n), repr(r.grad_norm), repr(r.eta), r.n,
                        f"{r.wall_ms:.3f}"])


def run_experiment(cfg):
    """Run one configured experiment and write its trace files."""
    cfg = cfg.validate()
    prob, amap = build_problem(cfg)
    solver_cfg = SolverConfig(max_iters=cfg.max_iters, method=cfg.method, quad_order=cfg.quad_order)
    net0 = initial_net(prob, make_uniform(cfg.n, 0.0, 1.0, anchor=cfg.anchor))
    if cfg.method == "bfgs":
        trace = run_bfgs_baseline(prob, net0, solver_cfg, seed=cfg.seed)
    elif cfg.method == "adbn":
        if not isinstance(prob, DRProblem):
            raise ConfigError("method: adbn needs a diffusion-reaction problem")
        acfg = AdaptiveConfig(eps_stop=cfg.eps_stop, max_level_iters=cfg.level_iters,
                              max_neurons=cfg.max_neurons)
        trace = run_adbn(prob, net0, solver_cfg, acfg=acfg)
    else:
        trace = run_dbn(prob, net0, solver_cfg)
    os.makedirs(cfg.out, exist_ok=True)
    paths = {"trace": os.path.join(cfg.out, "trace.csv"),
             "summary": os.path.join(cfg.out, "summary.txt"),
             "b_final": os.path.join(cfg.out, "b_final.csv")}
    _write_trace(paths["trace"], trace)
    final = trace.final
    summary = {
        "problem": cfg.problem,
        "method": cfg.method,
        "n": trace.net.n if trace.net is not None else final.n,
        "iters": final.iter,
        "J": final.J,
        "e_n": final.e_n,
        "r": rate_report(final.e_n, final.n),
        "status": trace.status,
        "seed": cfg.seed,
        "gamma": cfg.gamma,
    }
    if cfg.problem == "dr_singular":
        summary["nu"] = cfg.nu
    if trace.events:
        summary["refinements"] = "/".join(str(row.n) for row in trace.events)
        paths["refinements"] = os.path.join(cfg.out, "refinements.csv")
        with open(paths["refinements"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("n", "e_n", "xi_n", "r"))
            for row in trace.events:
                w.writerow((row.n, repr(row.e_n), repr(row.xi_n), repr(row.r)))
    with open(paths["summary"], "w") as fh:
        fh.write(" ".join(f"{k}={_fmt(v)}" for k, v in summary.items()) + "\n")
    b = amap.from_unit(trace.net.p.b) if trace.net is not None else np.array([])
    with open(paths["b_final"], "w") as fh:
        fh.writelines(f"{v:.17g}\n" for v in b)
    return ExperimentResult(cfg, trace, summary, paths)


def measure_condition(kind, n, anchor="interior", coeff=1.0):
    """Spectral condition number of the dense mass or stiffness matrix on a uniform mesh.

    Eigenvalues come from ``numpy.linalg.eigvalsh`` on the quadrature-assembled
    matrix, so the value is exact up to rounding (n <= 512).
    """
    if n > 512:
        raise ValueError("measure_condition is limited to n <= 512")
    p = make_uniform(n, anchor=anchor)
    if kind == "mass":
        M = dense_mass(coeff, p)
    elif kind == "stiffness":
        M = dense_stiffness(coeff, p)
    else:
        raise ValueError("kind must be 'mass' or 'stiffness'")
    ev = np.linalg.eigvalsh(M)
    return float(ev[-1] / ev[0])


def rate_report(e_n, n=None):
    """``r = ln(1/e_n) / ln n``; accepts a trace (uses its last record) or numbers."""
    if n is None:
        rec = e_n.final
        e_n, n = rec.e_n, rec.n
    return convergence_rate(float(e_n), int(n))
