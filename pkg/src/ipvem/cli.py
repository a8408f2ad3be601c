"""Command-line entry point: ``ipvem adapt ...`` and ``ipvem uniform ...``."""
from __future__ import annotations

import argparse
import logging
import sys

from .driver import AdaptiveConfig, fit_slope, run_adaptive, run_uniform
from .problems import PROBLEMS


def _common(p: argparse.ArgumentParser, theta: float | None) -> None:
    p.add_argument("--problem", choices=PROBLEMS, default="ex1")
    p.add_argument("--k", type=int, choices=(2, 3), default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=10.0, help="penalty parameter lambda_e")
    p.add_argument("--estimator", choices=("grad", "hess"), default="grad",
                   help="projector used in the penalty averages and the estimator")
    p.add_argument("--delta", type=float, default=1e-6, help="regularization of ex3")
    p.add_argument("--mesh", help="initial mesh file (text or JSON format)")
    p.add_argument("--out", help="output directory for reports")
    p.add_argument("--seq", action="store_true", help="build element operators sequentially")
    p.add_argument("-v", "--verbose", action="store_true")
    if theta is not None:
        p.add_argument("--theta", type=float, default=theta)
        p.add_argument("--max-iters", type=int, default=15)
        p.add_argument("--max-dofs", type=int, default=20000)
        p.add_argument("--n0", type=int, default=8, help="initial grid size when no mesh is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipvem", description="Interior penalty VEM for clamped Kirchhoff plates")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("adapt", help="adaptive SOLVE-ESTIMATE-MARK-REFINE loop"), theta=0.4)
    u = sub.add_parser("uniform", help="convergence study on uniform grids")
    _common(u, theta=None)
    u.add_argument("--ns", type=int, nargs="+", default=[8, 16, 32, 64], help="grid sizes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = AdaptiveConfig(problem=args.problem, k=args.k, lam=args.lam, estimator=args.estimator, delta=args.delta,
                         mesh_path=args.mesh, out_dir=args.out, parallel=not args.seq)
    try:
        if args.command == "adapt":
            cfg.theta, cfg.max_iters, cfg.max_dofs, cfg.n0 = args.theta, args.max_iters, args.max_dofs, args.n0
            res = run_adaptive(cfg)
            clog = res.log
            print(f"{'it':>3} {'N':>7} {'errH2':>11} {'eta':>11} {'eff':>6}")
            for r in clog.records:
                print(f"{r.iteration:3d} {r.ndofs:7d} {r.errh2:11.4e} {r.eta:11.4e} {r.effectivity:6.2f}")
            print(f"eta slope vs N: {fit_slope(clog.column('ndofs'), clog.column('eta')):.3f}")
        else:
            clog, slopes = run_uniform(cfg, tuple(args.ns))
            print(f"{'h':>9} {'N':>7} {'errH2':>11} {'eta':>11}")
            for r in clog.records:
                print(f"{r.hmax:9.4f} {r.ndofs:7d} {r.errh2:11.4e} {r.eta:11.4e}")
            print(f"h-slopes: errH2 {slopes['errh2']:.3f}, eta {slopes['eta']:.3f}")
    except Exception as exc:  # report and exit nonzero on any failure
        print(f"ipvem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
