"""Registry of benchmark problems with known solutions.

Each entry builds a problem on its natural interval.  Diffusion-reaction
entries carry ``u``, ``u'`` and ``u''`` so the registry can check its own PDE
residual.
"""
from dataclasses import dataclass, field

import numpy as np

from .models import DRProblem, LSProblem
from .quadrature import ScalarField, constant

__all__ = ["ProblemEntry", "REGISTRY", "get_problem", "self_test", "custom_problem", "layer_points"]


@dataclass(frozen=True)
class ProblemEntry:
    name: str
    kind: str  # "ls" or "dr"
    build: object
    interval: tuple = (0.0, 1.0)
    description: str = ""
    params: dict = field(default_factory=dict)


def layer_points(centers, width, half_span=30.0, count=61):
    """Graded split points clustered around interior layers of the given width."""
    s = np.sinh(np.linspace(-np.arcsinh(half_span), np.arcsinh(half_span), count))
    return np.concatenate([c + width * s for c in np.atleast_1d(centers)])


def _sqrt_problem(**_):
    grading = 10.0 ** -np.arange(0.5, 12.5, 0.5)
    return LSProblem(
        f=ScalarField(np.sqrt, lambda x: 0.5 / np.sqrt(x), name="sqrt"),
        r=constant(1.0),
        resolution=tuple(grading),
        u_exact=ScalarField(np.sqrt, name="sqrt"),
    )


_BUMP_W = 0.01
_BUMP_C = np.exp(-4.0 / 9.0 / _BUMP_W)


def _bump(x):
    return np.exp(-((x - 1.0 / 3.0) ** 2) / _BUMP_W)


def bump_u(x):
    return x * (_bump(x) - _BUMP_C)


def bump_du(x):
    e = _bump(x)
    return e - _BUMP_C - 2.0 * x * (x - 1.0 / 3.0) / _BUMP_W * e


def bump_d2u(x):
    e = _bump(x)
    t = (x - 1.0 / 3.0) / _BUMP_W
    # d/dx [e - C - 2 x t e]
    return -2.0 * t * e - 2.0 * (t + x / _BUMP_W) * e + 4.0 * x * t * t * e


def _bump_problem(gamma=1e4, **_):
    return DRProblem(
        a=constant(1.0),
        r=constant(1.0),
        f=ScalarField(lambda x: -bump_d2u(x) + bump_u(x), name="bump_rhs"),
        alpha_bc=0.0,
        beta_bc=0.0,
        gamma=gamma,
        resolution=tuple(np.linspace(0.0, 1.0, 65)[1:-1]),
        u_exact=ScalarField(bump_u, bump_du, name="bump"),
        du_exact=ScalarField(bump_du, bump_d2u, name="bump'"),
    )


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def _singular_fields(nu):
    eps = np.sqrt(nu)
    shift = np.tanh(0.75 / eps)

    def z(x):
        return (x * x - 0.25) / eps

    def u(x):
        return np.tanh(z(x)) - shift

    def du(x):
        return 2.0 * x / eps * _sech2(z(x))

    def d2u(x):
        s2 = _sech2(z(x))
        return 2.0 / eps * s2 - 8.0 * x * x / eps**2 * s2 * np.tanh(z(x))

    def f(x):
        t = np.tanh(z(x))
        return -2.0 * (eps - 4.0 * x * x * t) * _sech2(z(x)) + t - shift

    return eps, u, du, d2u, f


def _singular_problem(nu=1e-4, gamma=1e4, **_):
    if not nu > 0:
        raise ValueError("nu must be positive for the singular family")
    eps, u, du, d2u, f = _singular_fields(nu)
    return DRProblem(
        a=constant(nu),
        r=constant(1.0),
        f=ScalarField(f, name="singular_rhs"),
        alpha_bc=0.0,
        beta_bc=0.0,
        gamma=gamma,
        x_lo=-1.0,
        x_hi=1.0,
        resolution=tuple(np.concatenate((layer_points([-0.5, 0.5], eps),
                                         np.linspace(-1.0, 1.0, 65)[1:-1]))),
        u_exact=ScalarField(u, du, name="singular"),
        du_exact=ScalarField(du, d2u, name="singular'"),
    )


_NAMESPACE = {k: getattr(np, k) for k in ("sin", "cos", "exp", "log", "sqrt", "tanh", "cosh",
                                          "sinh", "abs", "pi", "arctan", "maximum", "minimum")}


def _expr(src, name):
    try:
        return constant(float(src), name=name)
    except ValueError:
        pass
    code = compile(src, f"<{name}>", "eval")
    for nm in code.co_names:
        if nm not in _NAMESPACE and nm != "x":
            raise ValueError(f"unknown name {nm!r} in expression for {name}")
    return ScalarField(lambda x: eval(code, {"__builtins__": {}}, {**_NAMESPACE, "x": x}), name=name)


def custom_problem(kind, f, a="1", r="1", alpha=0.0, beta=0.0, gamma=1e4, x_lo=0.0, x_hi=1.0,
                   u=None, du=None):
    """Problem from numpy expressions in ``x`` (e.g. ``f="sin(pi*x)"``)."""
    fields = {"f": _expr(f, "f"), "r": _expr(r, "r")}
    ue = _expr(u, "u") if u else None
    due = _expr(du, "du") if du else None
    if kind == "ls":
        return LSProblem(f=fields["f"], r=fields["r"], x_lo=x_lo, x_hi=x_hi, u_exact=ue)
    if kind == "dr":
        return DRProblem(a=_expr(a, "a"), r=fields["r"], f=fields["f"], alpha_bc=alpha,
                         beta_bc=beta, gamma=gamma, x_lo=x_lo, x_hi=x_hi, u_exact=ue,
                         du_exact=due)
    raise ValueError(f"unknown problem kind {kind!r}")


REGISTRY = {
    "ls_sqrt": ProblemEntry("ls_sqrt", "ls", _sqrt_problem, (0.0, 1.0), "least-squares fit of sqrt(x)"),
    "dr_exp_bump": ProblemEntry("dr_exp_bump", "dr", _bump_problem, (0.0, 1.0),
                                "-u'' + u = f with an exponential bump solution"),
    "dr_singular": ProblemEntry("dr_singular", "dr", _singular_problem, (-1.0, 1.0),
                                "-nu u'' + u = f with interior layers at +-1/2", {"nu": 1e-4}),
}

# exact second derivatives for the residual self-test
_SECOND = {"dr_exp_bump": lambda **_: bump_d2u,
           "dr_singular": lambda nu=1e-4, **_: _singular_fields(nu)[3]}


def get_problem(name, **params):
    """Build a registered problem; ``dr_singular`` accepts ``nu``, DR problems ``gamma``."""
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}") from None
    return entry.build(**params)


def self_test(name, samples=100, **params):
    """Max relative residual of the registered exact solution.

    DR: ``|-(a u')' + r u - f| / max(1, |f|)``; LS: ``|u - f|``.
    """
    prob = get_problem(name, **params)
    x = np.linspace(prob.x_lo, prob.x_hi, samples + 2)[1:-1]
    if isinstance(prob, LSProblem):
        return float(np.max(np.abs(prob.u_exact(x) - prob.f(x))))
    d2u = _SECOND[name](**params)
    a, da = prob.a(x), prob.a.derivative(x)
    du = prob.du_exact(x)
    res = -(da * du + a * d2u(x)) + prob.r(x) * prob.u_exact(x) - prob.f(x)
    return float(np.max(np.abs(res) / np.maximum(1.0, np.abs(prob.f(x)))))
