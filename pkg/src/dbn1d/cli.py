"""Command-line experiment runner.

    dbn1d fit-ls   --n 24 --iters 1000 --out runs/ls
    dbn1d solve-dr --problem dr_exp_bump --n 22 --iters 500
    dbn1d adapt    --n 20 --eps-stop 0.05
    dbn1d condition --kind mass --n 8 16 32
    dbn1d sweep-nu --n 32 --iters 200 --nus 1e-2 1e-4 1e-6

``--config FILE`` reads flat ``key = value`` lines first; flags win.
"""
import argparse
import csv
import logging
import os
import sys

from .experiments import (
    ConfigError,
    load_config,
    measure_condition,
    parse_config_text,
    run_experiment,
)

DEFAULTS = {
    "fit-ls": {"problem": "ls_sqrt", "method": "dbn"},
    "solve-dr": {"problem": "dr_exp_bump", "method": "dbn"},
    "adapt": {"problem": "dr_exp_bump", "method": "adbn"},
    "sweep-nu": {"problem": "dr_singular", "method": "dbn"},
}


def _common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--problem")
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=("dbn", "dbgn", "bfgs", "adbn"))
    p.add_argument("--iters", type=int, dest="max_iters")
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps-stop", type=float, dest="eps_stop")
    p.add_argument("--quad-order", type=int, dest="quad_order")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--nu", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="dbn1d", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("fit-ls", "least-squares fit"), ("solve-dr", "diffusion-reaction solve"),
                        ("adapt", "adaptive dBN (AdBN)")):
        _common(sub.add_parser(name, help=help_))
    sw = sub.add_parser("sweep-nu", help="singularly perturbed problem over several nu")
    _common(sw)
    sw.add_argument("--nus", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    cond = sub.add_parser("condition", help="condition numbers of uniform-mesh matrices")
    cond.add_argument("--kind", choices=("mass", "stiffness"), default="mass")
    cond.add_argument("--n", type=int, nargs="+", default=[8, 16, 32])
    cond.add_argument("--anchor", choices=("interior", "left"), default="interior")
    return parser


FLAG_KEYS = ("problem", "n", "method", "max_iters", "gamma", "eps_stop", "quad_order", "seed",
             "out", "nu")


def _config(args, command):
    """Subcommand defaults, then the config file, then explicit flags."""
    merged = dict(DEFAULTS.get(command, {}))
    if args.config:
        with open(args.config) as fh:
            merged.update(parse_config_text(fh.read()))
    merged.update({k: getattr(args, k) for k in FLAG_KEYS if getattr(args, k, None) is not None})
    return load_config(None, **merged)


def _print_summary(res):
    print(" ".join(f"{k}={v}" for k, v in res.summary.items()))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "condition":
            prev = None
            for n in args.n:
                k = measure_condition(args.kind, n, anchor=args.anchor)
                ratio = "" if prev is None else f" ratio={k / prev:.3f}"
                print(f"kind={args.kind} n={n} kappa={k:.6e}{ratio}")
                prev = k
            return 0
        if args.command == "sweep-nu":
            base = _config(args, "sweep-nu")
            rows = []
            for nu in args.nus:
                cfg = load_config(None, **{**base.__dict__, "nu": nu,
                                           "out": os.path.join(base.out, f"nu_{nu:g}")})
                res = run_experiment(cfg)
                _print_summary(res)
                rows.append((nu, res.trace.records[0].e_n, res.summary["e_n"]))
            os.makedirs(base.out, exist_ok=True)
            with open(os.path.join(base.out, "sweep.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("nu", "e_n_initial", "e_n_final"))
                w.writerows(rows)
            return 0
        res = run_experiment(_config(args, args.command))
        _print_summary(res)
        return 0
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
