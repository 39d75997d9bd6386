"""Command line entry point: ``bregopt {run,oracle,certify,grid}``.

Exit codes: 0 success, 1 configuration or input error, 2 one or more runs failed.
"""

import argparse
import json
import sys

import numpy as np

from .bench import ExperimentConfig, best_of_grid, load_config, run_experiment
from .diagnostics import certify_second_order
from .objectives import (BmfNonsymmetric, BmfSymmetric, MatrixPcaInstance,
                         bmf_objective_of_oracle, generate_instance, oracle_solution)
from .storage import load_instance, load_matrix

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _instance(args):
    if args.instance:
        return load_instance(args.instance)
    return generate_instance(args.n, args.m, args.rank, args.lam, not args.nonsymmetric,
                             args.seed, args.scaling)


def _add_instance_args(p):
    p.add_argument("--instance", help="instance stem (<stem>.txt + <stem>.json)")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling", type=float, default=1.0)
    p.add_argument("--nonsymmetric", action="store_true")


def _print_summary(summary):
    print(f"{'solver':8s} {'init':>6s} {'rep':>3s} {'eta':>10s} {'status':16s} "
          f"{'iters':>6s} {'gap':>11s}")
    for r in summary.selected():
        print(f"{r.solver:8s} {r.init_scale:6g} {r.repetition:3d} {r.eta:10.3e} "
              f"{r.status:16s} {r.iterations:6d} {r.final_gap:11.3e}")


def cmd_run(args):
    config = load_config(args.config)
    if args.output:
        config.output_dir = args.output
    summary = run_experiment(config)
    _print_summary(summary)
    if summary.failed:
        for r in summary.failed:
            print(f"failed: {r.run_name}: {r.status} {r.message}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_oracle(args):
    inst = _instance(args)
    sol = oracle_solution(inst)
    out = {"pca_objective": sol.objective_value,
           "bmf_objective": bmf_objective_of_oracle(inst, sol),
           "kept_values": np.asarray(sol.values).tolist()}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_certify(args):
    inst = _instance(args)
    n, m = inst.A.shape
    U = load_matrix(args.U)
    if U.shape != (n, inst.rank):
        raise ValueError(f"U has shape {U.shape}, expected {(n, inst.rank)}")
    if args.V:
        V = load_matrix(args.V)
        if V.shape != (m, inst.rank):
            raise ValueError(f"V has shape {V.shape}, expected {(m, inst.rank)}")
        ns = MatrixPcaInstance(inst.A, inst.lam, inst.rank, False, inst.seed, inst.scaling)
        rep = certify_second_order(BmfNonsymmetric(ns), U.ravel(), y=V.ravel(),
                                   grad_tol=args.grad_tol, curv_tol=args.curv_tol)
    else:
        if not inst.symmetric:
            raise ValueError("a single factor needs a symmetric instance; pass --V")
        rep = certify_second_order(BmfSymmetric(inst), U.ravel(),
                                   grad_tol=args.grad_tol, curv_tol=args.curv_tol)
    print(rep.to_json(indent=2))
    return EXIT_OK


def cmd_grid(args):
    if args.config:
        config = load_config(args.config)
    else:
        config = ExperimentConfig(n=args.n, m=args.m, rank=args.rank, lam=args.lam,
                                  symmetric=not args.nonsymmetric, seed=args.seed,
                                  scaling=args.scaling, instance_path=args.instance)
    config.solvers = (args.solver,)
    config.eta = {args.solver: "grid"}
    config.init_scales = (args.init_scale,)
    config.repetitions = 1
    if args.max_iters:
        config.max_iters = args.max_iters
    if args.output:
        config.output_dir = args.output
    config.__post_init__()
    summary = run_experiment(config)
    print(f"{'eta':>10s} {'status':16s} {'iters':>6s} {'to 1e-4':>8s} {'gap':>11s}")
    for r in summary.results:
        mark = "*" if r.selected else " "
        k = r.iters_to_gap.get("0.0001")
        print(f"{r.eta:10.3e} {r.status:16s} {r.iterations:6d} {str(k):>8s} "
              f"{r.final_gap:11.3e} {mark}")
    choice = best_of_grid(summary.results)
    if choice.all_diverged:
        print("every grid point diverged", file=sys.stderr)
        return EXIT_FAILED
    print(f"best eta: {choice.eta:.6e}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="bregopt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment described by an INI file")
    r.add_argument("config")
    r.add_argument("--output", help="override the output directory")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="print the oracle objective of an instance")
    _add_instance_args(o)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("certify", help="stationarity report for saved factors")
    _add_instance_args(c)
    c.add_argument("--U", required=True, help="matrix file with the first factor")
    c.add_argument("--V", help="matrix file with the second factor (bi-block)")
    c.add_argument("--grad-tol", type=float, default=None)
    c.add_argument("--curv-tol", type=float, default=None)
    c.set_defaults(func=cmd_certify)

    g = sub.add_parser("grid", help="step-size sweep for one solver")
    _add_instance_args(g)
    g.add_argument("--config", help="take instance and run settings from an INI file")
    g.add_argument("--solver", default="gd")
    g.add_argument("--init-scale", type=float, default=0.1)
    g.add_argument("--max-iters", type=int, default=None)
    g.add_argument("--output")
    g.set_defaults(func=cmd_grid)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError, KeyError,
            __import__("configparser").Error) as err:
        print(f"bregopt: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
