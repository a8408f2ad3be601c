"""Run the three adaptive benchmarks and write reports under ``results/<problem>``."""
import argparse
import logging
from pathlib import Path

from ipvem.driver import AdaptiveConfig, fit_slope, run_adaptive

RUNS = {
    "ex1": dict(theta=0.4, max_iters=15),
    "ex2": dict(theta=0.6, max_iters=15),
    "ex3": dict(theta=0.6, max_iters=30),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problems", nargs="*", default=list(RUNS), choices=list(RUNS))
    ap.add_argument("--out", default="results")
    ap.add_argument("--max-dofs", type=int, default=20000)
    ap.add_argument("--estimator", choices=("grad", "hess"), default="grad")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for name in args.problems:
        cfg = AdaptiveConfig(problem=name, max_dofs=args.max_dofs, estimator=args.estimator,
                             out_dir=str(Path(args.out) / name), **RUNS[name])
        clog = run_adaptive(cfg).log
        n = clog.column("ndofs")
        keep = n >= n[-1] / 10
        print(f"{name}: {len(n)} iterations, N = {int(n[-1])}, "
              f"eta slope (final decade) {fit_slope(n[keep], clog.column('eta')[keep]):.3f}, "
              f"ErrH2 slope {fit_slope(n[keep], clog.column('errh2')[keep]):.3f}")


if __name__ == "__main__":
    main()
