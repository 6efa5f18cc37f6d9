"""Command-line entry point ``imlfista``.

Exit codes: 0 success, 1 failed checks or unexpected error, 2 configuration
error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .multilevel import CoarseDecreaseError
from .solvers import ALGORITHMS, NumericalAbort

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("imlfista")


def _overrides(args) -> dict:
    """Config fragment built from the command-line flags that were given."""
    o: dict = {}

    def put(section, key, value):
        if value is not None:
            o.setdefault(section, {})[key] = value

    put("hierarchy", "depth", args.levels)
    put("hierarchy", "fraction", args.fraction)
    put("hierarchy", "p", args.p)
    put("hierarchy", "schedule", args.schedule)
    put("solver", "lambda", args.lam)
    put("solver", "rho", args.rho)
    put("solver", "gamma", args.gamma)
    if args.budget_cost is not None or args.budget_seconds is not None:
        o["budget"] = {"cost": args.budget_cost, "seconds": args.budget_seconds, "iterations": None}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.out is not None:
        o["output"] = args.out
    if getattr(args, "cycles", None) is not None:
        o["reweighting"] = {"cycles": args.cycles}
    return o


def _config(args):
    from .experiment import bundled_config, load_config, validate_config, _merge

    if args.config is None:
        return validate_config(_merge(bundled_config("smoke"), _overrides(args)))
    return load_config(args.config, _overrides(args))


def cmd_simulate(args):
    from .experiment import hierarchy_for, simulate, write_simulation

    cfg = _config(args)
    sim = simulate(cfg)
    out = Path(cfg["output"])
    h = hierarchy_for(cfg, sim.problem())
    write_simulation(sim, out, h)
    if cfg["figures"]:
        from . import plotting

        plotting.plot_coverage(sim.coverage, h, out / "coverage.png")
    print(json.dumps({
        "m": sim.operator.m, "image_size": int(sim.truth.shape[0]), "sigma": sim.sigma,
        "input_snr_db": sim.input_snr_db, "levels": [lv.m for lv in h.levels], "output": str(out),
    }))
    return EXIT_OK


def cmd_solve(args):
    from .experiment import resolve_lambda, run_algorithm, simulate, solver_config, hierarchy_for, MetricsRow
    from . import fileio

    cfg = _config(args)
    sim = simulate(cfg)
    problem = sim.problem()
    lam = resolve_lambda(cfg, problem)
    config = solver_config(cfg, problem, lam)
    h = hierarchy_for(cfg, problem) if args.algo == "iml-fista" else None
    x, trace, _ = run_algorithm(args.algo, problem, config, h, cfg["reweighting"]["cycles"])
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / f"trace_{args.algo}.csv")
    fileio.save_image(out / f"final_{args.algo}.img", x)
    fileio.save_pgm(out / f"final_{args.algo}.pgm", x)
    print(json.dumps(vars(MetricsRow.from_trace(args.algo, trace))))
    return EXIT_OK


def cmd_benchmark(args):
    from .experiment import run_experiment

    cfg = _config(args)
    if args.algo is not None:
        cfg["algorithms"] = [args.algo]
    summary = run_experiment(cfg)
    for row in summary["metrics"]:
        print(",".join(f"{k}={v}" for k, v in row.items()))
    if "speedups" in summary:
        print(json.dumps({"f_star": summary["f_star"], "speedups": summary["speedups"]}))
    return EXIT_OK


def cmd_grid(args):
    from .experiment import grid_lambda

    cfg = _config(args)
    rows = grid_lambda(cfg, args.algo or "fista")
    best = max(rows, key=lambda r: r["snr_db"])
    print(json.dumps({"best": best, "points": len(rows)}))
    return EXIT_OK


def cmd_check(args):
    from .checks import run_suite

    try:
        results = run_suite(args.suite, args.seed or 0)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(json.dumps(r.as_dict()))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="imlfista", description="Multilevel FISTA imaging benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algo=False):
        sp.add_argument("--config", type=Path, help="experiment JSON (default: bundled smoke config)")
        if algo:
            sp.add_argument("--algo", choices=ALGORITHMS)
        sp.add_argument("--levels", type=int, help="hierarchy depth including the fine level")
        sp.add_argument("--fraction", type=float, help="fraction of visibilities kept per coarse level")
        sp.add_argument("--p", type=int, help="gradient steps per coarse level")
        sp.add_argument("--schedule", choices=["first-r", "every-K", "none"])
        sp.add_argument("--lambda", dest="lam", type=float, help="absolute regularization weight")
        sp.add_argument("--rho", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--budget-cost", type=float, help="cost units per run (per cycle when reweighting)")
        sp.add_argument("--budget-seconds", type=float)
        sp.add_argument("--cycles", type=int, help="reweighting cycles")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("simulate", help="generate phantom, coverage and visibilities")
    common(sp)
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("solve", help="run one algorithm")
    common(sp, algo=True)
    sp.set_defaults(func=cmd_solve, algo="iml-fista")
    sp = sub.add_parser("benchmark", help="run all configured algorithms under equal budgets")
    common(sp, algo=True)
    sp.set_defaults(func=cmd_benchmark)
    sp = sub.add_parser("grid-lambda", help="SNR over a geometric lambda grid")
    common(sp, algo=True)
    sp.set_defaults(func=cmd_grid)
    sp = sub.add_parser("check", help="run an invariant suite")
    sp.add_argument("suite", help="adjoint, parseval, gradient, coherence, prox or all")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    from .experiment import ConfigError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    stage = args.command
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{stage}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, CoarseDecreaseError, FloatingPointError) as exc:
        print(f"{stage}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"{stage}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
